class BiasLensError(Exception):
    """Base class for errors raised by biaslens."""


class DistributionError(BiasLensError, ValueError):
    """Malformed probability table, dataset or schema."""


class UndefinedConditionalError(BiasLensError, ValueError):
    """A conditional probability was requested on a zero-mass event."""


class SpecError(BiasLensError, ValueError):
    """A biasing specification is outside its admissible range."""


class InfeasibleError(BiasLensError, ValueError):
    """The requested reconstruction is not admissible for the given distribution."""


class TrainingDivergence(BiasLensError, RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss


class AuditError(BiasLensError, ValueError):
    """An audit's preconditions fail (empty shared support, undefined odds)."""
