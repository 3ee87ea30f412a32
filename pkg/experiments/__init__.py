from .runner import ExperimentConfig, ExperimentRunner, cache_key, clean
