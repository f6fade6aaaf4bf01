import logging
# The importlib module provides a way to import other modules dynamically
from importlib import import_module
# The inspect module provides functions for inspecting live objects such as modules, classes, and functions
from inspect import getmembers, isabstract, isclass

from config.DEFAULTS import (PRECOMPUTED_PREFIX, SCORER_ACTIVATIONS,
                             SCORER_JUDGE, SCORER_SELF_CERTAINTY,
                             SCORER_VERBALIZED)
from src.scorers.Scorer import Scorer
from src.utils.errors import ConfigError

logger = logging.getLogger(__name__)

# Scorer name -> module under src.scorers defining the scorer class
SCORER_MODULES = {
    SCORER_SELF_CERTAINTY: "SelfCertaintyScorer",
    SCORER_VERBALIZED: "VerbalizedScorer",
    SCORER_ACTIVATIONS: "ActivationsScorer",
    SCORER_JUDGE: "JudgeScorer",
    "precomputed": "PrecomputedScorer",
}


class ScorerFactory:
    @staticmethod
    def load_class(scorer_name, settings=None) -> Scorer:
        settings = dict(settings or {})
        module_key = scorer_name
        if scorer_name.startswith(PRECOMPUTED_PREFIX):
            module_key = "precomputed"
            settings.setdefault("source", scorer_name[len(PRECOMPUTED_PREFIX):])
            if not settings["source"]:
                raise ConfigError("precomputed scorer needs a name: precomputed:<name>", field_path="scorers")

        module_name = SCORER_MODULES.get(module_key)
        if module_name is None:
            raise ConfigError(f"unknown scorer '{scorer_name}'", field_path="scorers")

        # The "." prefix means that the module is searched for in the src.scorers package
        logger.info("Importing scorer module " + module_name)
        factory_module = import_module("." + module_name, "src.scorers")

        # Concrete Scorer subclasses defined in that module
        classes = getmembers(factory_module, lambda m: isclass(m) and not isabstract(m)
                             and issubclass(m, Scorer) and m.__module__ == factory_module.__name__)
        for name, _class in classes:
            return _class(settings)

        raise ConfigError(f"module {module_name} defines no scorer", field_path="scorers")
