"""Pipeline components for running speech representation experiments."""

from .experiment import ExperimentPipeline, config_hash

__all__ = ['ExperimentPipeline', 'config_hash']
