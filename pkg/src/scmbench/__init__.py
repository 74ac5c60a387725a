"""Sequential structural-causal-model simulator and treatment-effect
estimation benchmark built around a census-income cohort."""

__version__ = "0.1.0"
