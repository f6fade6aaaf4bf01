# *************************************************************************************************************************
#   ProbeModel.py
#       The activations probe: an MLP over the agent's final-layer hidden state predicting step incorrectness.
# -------------------------------------------------------------------------------------------------------------------
#   Usage:
#       model = ProbeModel(d_in=64, seed=0)
#       failure = probe_forward(model, hidden_state)
#       outputs, errors = probe_score(model, traces)
#       save_probe(model, "probe.bin", config_hash=...); model = load_probe("probe.bin")
#
#   Design Notes:
#   -.  Layers [d_in, 256, 128, 64, 32, 1]: five weight layers, ReLU on the hidden ones, sigmoid on the output.
#       The output is a failure score (1 = step incorrect).
#   -.  Weights and biases are drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)) with a generator seeded from the run
#       seed, so a model is reproducible without any global random state.
#   -.  Model file: 'SGPR' | u32 version | u32 layer-dimension count | u64 dims... | u64 seed | 32-byte config
#       sha256 | float32 parameters (per layer: weight row-major [out, in], then bias). Little-endian.
# *************************************************************************************************************************

import hashlib
import logging
import math
import struct

import numpy as np
import torch
from torch import nn

from config.DEFAULTS import (DEFAULT_PROBE_HIDDEN_DIMS, GRANULARITY_STEP,
                             SCORER_ACTIVATIONS)
from src.scorers.Scorer import ScorerOutput
from src.utils.errors import (DataError, MissingEvidenceError,
                              ProbeDimensionError, ProbeFormatError)

logger = logging.getLogger(__name__)

PROBE_MAGIC = b"SGPR"
PROBE_VERSION = 1
_PROBE_PREAMBLE = struct.Struct("<4sII")


class ProbeModel(nn.Module):
    def __init__(self, d_in, hidden_dims=None, seed=0, dtype=torch.float32):
        super().__init__()
        hidden_dims = list(DEFAULT_PROBE_HIDDEN_DIMS if hidden_dims is None else hidden_dims)
        self.dims = [int(d_in)] + [int(h) for h in hidden_dims] + [1]
        self.seed = int(seed)
        self.layers = nn.ModuleList(
            nn.Linear(fan_in, fan_out, dtype=dtype) for fan_in, fan_out in zip(self.dims[:-1], self.dims[1:]))
        self.reset_parameters(self.seed)

    @property
    def d_in(self):
        return self.dims[0]

    def reset_parameters(self, seed):
        generator = torch.Generator().manual_seed(int(seed))
        with torch.no_grad():
            for layer in self.layers:
                bound = 1.0 / math.sqrt(layer.in_features)
                for parameter in (layer.weight, layer.bias):
                    draw = torch.rand(parameter.shape, generator=generator, dtype=torch.float64)
                    parameter.copy_((2.0 * draw - 1.0) * bound)

    def logits(self, x):
        for layer in self.layers[:-1]:
            x = torch.relu(layer(x))
        return self.layers[-1](x).squeeze(-1)

    def forward(self, x):
        return torch.sigmoid(self.logits(x))

    @property
    def dtype(self):
        return self.layers[0].weight.dtype

    def parameters_finite(self):
        return all(bool(torch.isfinite(p).all()) for p in self.parameters())


def _as_input(model, x):
    array = np.asarray(x, dtype=np.float64)
    if array.shape[-1] != model.d_in:
        raise ProbeDimensionError(f"probe expects dimension {model.d_in}, got {array.shape[-1]}")
    return torch.as_tensor(array, dtype=model.dtype)


def probe_forward(model, x):
    """
    Failure score in (0, 1) for one hidden state.
    """
    if np.ndim(x) != 1:
        raise ProbeDimensionError(f"probe_forward takes one vector, got shape {np.shape(x)}")
    model.eval()
    with torch.no_grad():
        return float(model(_as_input(model, x)))


def probe_predict(model, matrix):
    model.eval()
    with torch.no_grad():
        return model(_as_input(model, matrix)).double().numpy()


def probe_score(model, traces):
    """
    Per-step failure scores from each step's hidden state; returns ({id: ScorerOutput}, {id: error}).
    """
    outputs, errors = {}, {}
    for trace in traces:
        try:
            outputs[trace.id] = probe_score_trace(model, trace)
        except DataError as e:
            errors[trace.id] = e
    return outputs, errors


def probe_score_trace(model, trace):
    states = []
    for index, step in enumerate(trace.steps, start=1):
        if step.hidden_state is None:
            raise MissingEvidenceError("hidden_state required by the activations probe is missing",
                                       trace_id=trace.id, step_index=index)
        if len(step.hidden_state) != model.d_in:
            raise MissingEvidenceError(f"hidden_state has dimension {len(step.hidden_state)}, probe expects {model.d_in}",
                                       trace_id=trace.id, step_index=index)
        states.append(step.hidden_state)
    scores = probe_predict(model, np.asarray(states, dtype=np.float64))
    return ScorerOutput(SCORER_ACTIVATIONS, GRANULARITY_STEP, per_step=[float(s) for s in scores])


# ***********************************************
#  persistence
# ***********************************************

def save_probe(model, path, config_hash=""):
    digest = bytes.fromhex(config_hash) if config_hash else hashlib.sha256(b"").digest()
    if len(digest) != 32:
        raise ValueError("config_hash must be a sha256 hex digest")
    with open(path, "wb") as handle:
        handle.write(_PROBE_PREAMBLE.pack(PROBE_MAGIC, PROBE_VERSION, len(model.dims)))
        handle.write(struct.pack(f"<{len(model.dims)}Q", *model.dims))
        handle.write(struct.pack("<Q", model.seed))
        handle.write(digest)
        for layer in model.layers:
            for parameter in (layer.weight, layer.bias):
                handle.write(parameter.detach().to(torch.float32).numpy().astype("<f4").tobytes(order="C"))
    logger.info("Saved probe %s to %s", model.dims, path)
    return path


def load_probe(path):
    """
    Returns (model, config sha256 hex).
    """
    with open(path, "rb") as handle:
        blob = handle.read()
    if len(blob) < _PROBE_PREAMBLE.size:
        raise ProbeFormatError(f"{path}: not a probe model file")
    magic, version, dim_count = _PROBE_PREAMBLE.unpack_from(blob, 0)
    if magic != PROBE_MAGIC or version != PROBE_VERSION:
        raise ProbeFormatError(f"{path}: bad probe header {magic!r} v{version}")
    offset = _PROBE_PREAMBLE.size
    try:
        dims = list(struct.unpack_from(f"<{dim_count}Q", blob, offset))
        offset += 8 * dim_count
        (seed,) = struct.unpack_from("<Q", blob, offset)
    except struct.error:
        raise ProbeFormatError(f"{path}: truncated probe header")
    offset += 8
    if len(dims) < 2 or min(dims) < 1:
        raise ProbeFormatError(f"{path}: bad probe layer sizes {dims}")
    digest = blob[offset:offset + 32]
    offset += 32

    model = ProbeModel(dims[0], dims[1:-1], seed=seed)
    expected = sum(p.numel() for p in model.parameters()) * 4
    if len(blob) - offset != expected:
        raise ProbeFormatError(f"{path}: expected {expected} parameter bytes, found {len(blob) - offset}")
    with torch.no_grad():
        for layer in model.layers:
            for parameter in (layer.weight, layer.bias):
                count = parameter.numel()
                values = np.frombuffer(blob, dtype="<f4", count=count, offset=offset).reshape(tuple(parameter.shape))
                parameter.copy_(torch.from_numpy(values.astype(np.float32)))
                offset += count * 4
    return model, digest.hex()
