# *************************************************************************************************************************
#   Commands.py
#       The StepGuard subcommands: synth, score, evaluate, prepare-train, train-probe and report.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       exit_code = run_command(parse_command_line_args(argv))      # what main.py does
#       cmd_score(RunConfig("run.json"))                            # or call one command directly
#
#   Outputs (under output_dir):
#       synth          traces.jsonl, traces.logits.bin
#       score          scored_<scorer>_<granularity>.jsonl per scorer and granularity
#       evaluate       report.json, summary.csv, roc_<scorer>_<granularity>.csv
#       prepare-train  train.jsonl, prepare_summary.json
#       train-probe    probe.bin, probe_curve.csv, probe_summary.json
#       every command  manifest.json
#
#   Design Notes:
#   -.  Exit codes: 0 success, 1 usage or configuration error, 2 data or scorer error, 3 judge endpoint error.
#   -.  Reports carry the default view (max_failure, recall target 0.9, 10 ECE bins) for every row and an
#       'override' view when the run configuration differs from it.
# *************************************************************************************************************************

import glob
import json
import logging
import os
import sys
import threading

import pandas as pd
from tabulate import tabulate

from config.DEFAULTS import (DEFAULT_SIDECAR_SUFFIX,
                             EXIT_DATA, EXIT_JUDGE, EXIT_SUCCESS, EXIT_USAGE,
                             FLAWED_REASONING_SUBSET, GRANULARITY_RESPONSE,
                             GRANULARITY_STEP, REFERENCE_DEFAULTS, SCORER_JUDGE,
                             TOOLKIT_VERSION)
from src.cli.RunManifest import write_manifest
from src.metrics.DetectionMetrics import LabeledScore, auc_from_arrays
from src.metrics.EvaluationReport import (evaluate_scores, relative_delta,
                                          write_roc_points)
from src.pipeline.ScoringPipeline import (aggregate_steps, load_scored,
                                          run_scorer, save_scored,
                                          scored_file_name)
from src.pipeline.TeacherForcing import (build_teacher_forced_detailed,
                                         save_training_set)
from src.probe.ProbeModel import probe_predict, save_probe
from src.probe.ProbeTrainer import (ProbeTrainConfig, examples_from_traces,
                                    probe_train, write_training_curve)
from src.scorers.ScorerFactory import ScorerFactory
from src.synth.SynthGenerator import SynthConfig, generate
from src.traces.LogitsSidecar import write_sidecar
from src.traces.TraceIO import open_dataset, save_traces
from src.utils.errors import (ConfigError, DataError, JudgeError,
                              OrphanLabelError, StepGuardError)
from src.utils.helperFunctions import err_to_str, load_json_file
from src.utils.RunConfig import RunConfig
from src.utils.StepGuardLogWrapper import StepGuardLogWrapper

logger = logging.getLogger(__name__)

REPORT_FILE = "report.json"
SUMMARY_FILE = "summary.csv"


def _output_path(run_config, name):
    output_dir = run_config.get('output_dir')
    os.makedirs(output_dir, exist_ok=True)
    return os.path.join(output_dir, name)


def _write_json(path, document):
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _require_traces(run_config):
    if not run_config.get('inputs.traces'):
        raise ConfigError("no input traces given", field_path="inputs.traces")
    run_config.validate(require_scorers=False)
    return open_dataset(run_config.get('inputs.traces'), run_config.get('inputs.sidecar'))


# ***********************************************
#  synth
# ***********************************************

def cmd_synth(run_config, synth_config_path=None):
    config = SynthConfig.from_file(synth_config_path) if synth_config_path else SynthConfig.from_dict({})
    traces, logits = generate(config)
    traces_path = _output_path(run_config, "traces.jsonl")
    sidecar_path = _output_path(run_config, "traces" + DEFAULT_SIDECAR_SUFFIX)
    save_traces(traces, traces_path)
    write_sidecar(sidecar_path, logits)
    write_manifest(run_config.get('output_dir'), "synth", config.config_hash(), config.seed,
                   inputs=[synth_config_path] if synth_config_path else [],
                   outputs=[traces_path, sidecar_path], shard=config.shard, trace_count=len(traces))
    logger.info("Wrote %d synthetic traces to %s", len(traces), traces_path)
    return [traces_path, sidecar_path]


# ***********************************************
#  score
# ***********************************************

def _scorer_settings(run_config, spec):
    settings = dict(spec.get('settings') or {})
    if spec['name'] == SCORER_JUDGE:
        settings = dict(run_config.get('judge'), **settings)
    return settings


def cmd_score(run_config):
    run_config.validate(require_scorers=True)
    dataset = _require_traces(run_config)
    written = []
    try:
        for spec in run_config.get('scorers'):
            scorer = ScorerFactory.load_class(spec['name'], _scorer_settings(run_config, spec))
            try:
                for granularity in run_config.get('granularities'):
                    if granularity not in scorer.granularities:
                        logger.warning("Scorer %s has no %s granularity; skipped", scorer.name, granularity)
                        continue
                    scored, _ = run_scorer(dataset, scorer, granularity,
                                           aggregator=run_config.get('aggregator'),
                                           failure_fraction=run_config.get('failure_fraction'),
                                           workers=run_config.get('workers'))
                    written.append(save_scored(scored, _output_path(run_config,
                                                                    scored_file_name(scorer.name, granularity))))
            finally:
                scorer.close()
    finally:
        dataset.close()

    inputs = list(dataset.paths or []) + dataset.sidecar_paths()
    write_manifest(run_config.get('output_dir'), "score", run_config.config_hash(), run_config.get('seed'),
                   inputs=inputs, outputs=written)
    return written


# ***********************************************
#  evaluate
# ***********************************************

def flawed_reasoning_correct_answer(trace):
    """
    Some reasoning step is wrong while the final answer is right.
    """
    wrong_reasoning = trace.response_label == 1 or any(s.step_label == 1 for s in trace.steps)
    return wrong_reasoning and trace.answer_label == 0


def _trace_label(trace, source):
    if source == "answer":
        return trace.answer_label
    if trace.response_label is not None:
        return trace.response_label
    return trace.derived_response_label()


def labeled_scores(scored, traces_by_id, source, aggregator=None):
    """
    Join scored interactions with trace labels. aggregator recomputes step aggregates (None keeps the stored one).
    """
    data, orphans = [], []
    for item in scored:
        trace = traces_by_id.get(item.trace_id)
        if trace is None:
            orphans.append(item.trace_id)
            continue
        if source == "step":
            if item.per_step is None:
                raise DataError(f"step labels need step-granularity scores, {item.scorer_name} is response-level")
            if len(item.per_step) != trace.n:
                raise DataError(f"trace '{item.trace_id}' has {trace.n} steps but {item.scorer_name} scored "
                                f"{len(item.per_step)}")
            for index, (score, step) in enumerate(zip(item.per_step, trace.steps), start=1):
                if step.step_label is None:
                    orphans.append(f"{item.trace_id}#{index}")
                else:
                    data.append(LabeledScore(f"{item.trace_id}#{index}", score, step.step_label))
            continue
        label = _trace_label(trace, source)
        if label is None:
            orphans.append(item.trace_id)
            continue
        score = item.aggregate
        if item.per_step is not None and aggregator is not None:
            score = aggregate_steps(item.per_step, aggregator)
        subsets = frozenset([FLAWED_REASONING_SUBSET]) if flawed_reasoning_correct_answer(trace) else frozenset()
        data.append(LabeledScore(item.trace_id, score, label, subsets))
    if orphans:
        raise OrphanLabelError(orphans)
    return data


def _override_view(run_config):
    view = {'aggregator': run_config.get('aggregator'),
            'recall_target': run_config.get('metrics.recall_target'),
            'ece_bins': run_config.get('metrics.ece_bins')}
    return None if view == REFERENCE_DEFAULTS else view


def _evaluate_view(scored, traces_by_id, source, view):
    data = labeled_scores(scored, traces_by_id, source, aggregator=view['aggregator'])
    subsets = [] if source == "step" else [FLAWED_REASONING_SUBSET]
    return evaluate_scores(data, view['recall_target'], view['ece_bins'], subsets)


def _summary_row(row, view_name, report):
    fpr = report['fpr_at_recall']
    return {
        "scorer": row['scorer_name'], "granularity": row['granularity'], "labels": row['labels'],
        "view": view_name, "auc_roc": report['auc_roc'], "auc_delta_vs_response": row['auc_delta_vs_response'],
        "recall_target": fpr['target'], "fpr_at_recall": fpr['fpr'], "achieved": fpr['achieved'],
        "max_recall": fpr['max_recall'], "ece": report['ece']['value'], "ece_bins": report['ece']['bins'],
        "flawed_reasoning_recall": report['subset_recalls'].get(FLAWED_REASONING_SUBSET),
        "positives": report['counts']['positives'], "negatives": report['counts']['negatives'],
    }


def cmd_evaluate(run_config, scored_paths=None):
    dataset = _require_traces(run_config)
    dataset.close()
    traces_by_id = dataset.by_id()
    source = run_config.get('metrics.labels')
    scored_paths = sorted(scored_paths or glob.glob(os.path.join(run_config.get('output_dir'), "scored_*.jsonl")))
    if not scored_paths:
        raise ConfigError("no scored files to evaluate", field_path="scored")

    override = _override_view(run_config)
    rows = []
    for path in scored_paths:
        scored = load_scored(path)
        if not scored:
            logger.warning("Scored file %s is empty; skipped", path)
            continue
        first = scored[0]
        if source == "step" and first.granularity != GRANULARITY_STEP:
            logger.debug("Step labels: response-level scored file %s skipped", path)
            continue
        reference_report = _evaluate_view(scored, traces_by_id, source, REFERENCE_DEFAULTS)
        row = {"scorer_name": first.scorer_name, "granularity": first.granularity, "labels": source,
               "scored_file": os.path.basename(path), "count": len(scored),
               "reference": reference_report, "override": None, "auc_delta_vs_response": None}
        if override is not None:
            row['override'] = _evaluate_view(scored, traces_by_id, source, override)
        rows.append(row)
    if source == "step" and not rows:
        raise DataError("step labels need step-granularity scored files; none were given")

    # relative AUC change of step over response scoring for the same scorer
    response_auc = {r['scorer_name']: r['reference'].auc_roc for r in rows
                    if r['granularity'] == GRANULARITY_RESPONSE}
    for row in rows:
        if row['granularity'] == GRANULARITY_STEP:
            row['auc_delta_vs_response'] = relative_delta(row['reference'].auc_roc,
                                                          response_auc.get(row['scorer_name']))

    written = []
    summary = []
    for row in rows:
        stem = f"{row['scorer_name'].replace(':', '_')}_{row['granularity']}"
        written.append(write_roc_points(row['reference'].roc_points, _output_path(run_config, f"roc_{stem}.csv")))
        row['reference'] = row['reference'].to_dict()
        summary.append(_summary_row(row, "reference", row['reference']))
        if row['override'] is not None:
            row['override'] = row['override'].to_dict()
            summary.append(_summary_row(row, "override", row['override']))

    report = {"toolkit_version": TOOLKIT_VERSION, "config_hash": run_config.config_hash(), "labels": source,
              "reference_defaults": REFERENCE_DEFAULTS, "override_config": override, "rows": rows}
    report_path = _write_json(_output_path(run_config, REPORT_FILE), report)
    summary_path = _output_path(run_config, SUMMARY_FILE)
    pd.DataFrame(summary).to_csv(summary_path, index=False, float_format="%.10g")
    written = [report_path, summary_path] + written

    write_manifest(run_config.get('output_dir'), "evaluate", run_config.config_hash(), run_config.get('seed'),
                   inputs=list(dataset.paths or []) + scored_paths, outputs=written)
    return report


# ***********************************************
#  prepare-train / train-probe
# ***********************************************

def cmd_prepare_train(run_config):
    dataset = _require_traces(run_config)
    dataset.close()
    examples, skipped = build_teacher_forced_detailed(dataset.traces)
    train_path = save_training_set(examples, _output_path(run_config, "train.jsonl"))
    summary = {"examples": len(examples), "skipped_traces": len(skipped), "skipped_ids": skipped,
               "seed": run_config.get('seed'), "config_hash": run_config.config_hash()}
    summary_path = _write_json(_output_path(run_config, "prepare_summary.json"), summary)
    write_manifest(run_config.get('output_dir'), "prepare-train", run_config.config_hash(), run_config.get('seed'),
                   inputs=dataset.paths or [], outputs=[train_path, summary_path])
    return summary


def cmd_train_probe(run_config):
    dataset = _require_traces(run_config)
    dataset.close()
    config = ProbeTrainConfig.from_settings(run_config.get('probe'))
    result = probe_train(examples_from_traces(dataset.traces), config)

    model_path = save_probe(result.model, _output_path(run_config, "probe.bin"), config.config_hash())
    curve_path = write_training_curve(result.curve, _output_path(run_config, "probe_curve.csv"))
    features, labels = result.validation
    summary = {"dims": result.model.dims, "best_epoch": result.best_epoch, "epochs_run": len(result.curve),
               "validation_auc": auc_from_arrays(probe_predict(result.model, features), labels),
               "validation_examples": int(labels.size), "seed": config.seed, "config_hash": config.config_hash(),
               "hyperparameters": config.to_dict()}
    summary_path = _write_json(_output_path(run_config, "probe_summary.json"), summary)
    write_manifest(run_config.get('output_dir'), "train-probe", config.config_hash(), config.seed,
                   inputs=dataset.paths or [], outputs=[model_path, curve_path, summary_path])
    logger.info("Probe validation AUC %.4f", summary['validation_auc'])
    return summary


# ***********************************************
#  report
# ***********************************************

def _fmt(value, digits=3):
    return "-" if value is None else f"{value:.{digits}f}"


def render_report(report, table_format="github"):
    target = report['reference_defaults']['recall_target']
    headers = ["Technique", "Granularity", "AUC (↑)", "Δ AUC", "ECE (↓)", f"FPR@{target} rec (↓)",
               "Flawed-reasoning recall (↑)"]
    table = []
    for row in report['rows']:
        view = row['reference']
        fpr = view['fpr_at_recall']
        fpr_text = _fmt(fpr['fpr']) if fpr['achieved'] else f"1.0 (mr: {_fmt(fpr['max_recall'])})"
        delta = row.get('auc_delta_vs_response')
        table.append([row['scorer_name'], row['granularity'], _fmt(view['auc_roc']),
                      "-" if delta is None else f"{delta * 100:+.0f}%", _fmt(view['ece']['value']), fpr_text,
                      _fmt(view['subset_recalls'].get(FLAWED_REASONING_SUBSET))])
    return tabulate(table, headers=headers, tablefmt=table_format)


def cmd_report(run_config, report_path=None, table_format="github"):
    report_path = report_path or os.path.join(run_config.get('output_dir'), REPORT_FILE)
    if not os.path.isfile(report_path):
        raise ConfigError(f"report not found: {report_path}", field_path="report_path")
    text = render_report(load_json_file(report_path), table_format)
    print(text)
    return text


# ***********************************************
#  dispatch
# ***********************************************

def _dispatch(args, run_config):
    command = args['command']
    if command == "synth":
        return cmd_synth(run_config, args.get('synth_config'))
    if command == "score":
        return cmd_score(run_config)
    if command == "evaluate":
        return cmd_evaluate(run_config, args.get('scored'))
    if command == "prepare-train":
        return cmd_prepare_train(run_config)
    if command == "train-probe":
        return cmd_train_probe(run_config)
    if command == "report":
        return cmd_report(run_config, args.get('report_path'), args.get('table_format') or "github")
    raise ConfigError(f"unknown command '{command}'")


def run_command(args):
    """
    Configure, set up logging, run one subcommand and return its exit code.
    """
    try:
        run_config = RunConfig(args.get('config'), args.get('overrides'), args)
    except ConfigError as e:
        print(f"?? {threading.current_thread().name}: configuration error: {err_to_str(e)}", file=sys.stderr)
        return EXIT_USAGE

    logging_settings = dict(run_config.get('logging') or {})
    if args.get('logfile'):
        logging_settings['logfile_file'] = args['logfile']
    if args.get('log_level'):
        logging_settings['console_log_level'] = args['log_level']
    log_wrapper = StepGuardLogWrapper(logging_settings)
    if not log_wrapper.set_up_logging():
        print(f"?? {threading.current_thread().name}: Failed to set up logging, aborting.", file=sys.stderr)
        return EXIT_USAGE

    try:
        _dispatch(args, run_config)
        return EXIT_SUCCESS
    except ConfigError as e:
        logger.critical(f"Configuration error: {err_to_str(e)}")
        return EXIT_USAGE
    except JudgeError as e:
        logger.critical(f"Judge endpoint error: {err_to_str(e)}")
        return EXIT_JUDGE
    except (DataError, StepGuardError) as e:
        logger.critical(f"{args['command']} failed: {err_to_str(e)}")
        return EXIT_DATA
    except OSError as e:
        logger.critical(f"{args['command']} failed on a file: {err_to_str(e)}")
        return EXIT_DATA
    finally:
        log_wrapper.tear_down_logging()
