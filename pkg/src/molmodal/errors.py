"""Exception types shared across the package."""


class MolmodalError(Exception):
    """Base class for all package errors."""


class MalformedSmiles(MolmodalError):
    """SMILES string violates the token grammar or graph rules."""


class DatasetError(MolmodalError):
    """Dataset file missing, malformed, or empty after parsing."""


class SplitError(MolmodalError):
    """Requested split would leave a partition empty."""


class VocabError(MolmodalError):
    """Token id outside the vocabulary."""


class EmptyMask(MolmodalError):
    """No valid labels in a batch."""


class ConfigError(MolmodalError):
    """Invalid run configuration value."""


class NumericalError(MolmodalError):
    """A loss term became non-finite during training."""


class DegenerateTask(MolmodalError):
    """Classification task whose valid labels are all one class."""
