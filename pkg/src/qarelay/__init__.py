"""Quality-aware relay selection and coding-rate allocation for 60 GHz video uplinks."""

__version__ = "0.1.0"
MODEL_REVISION = 1
