"""
Error hierarchy shared by all solver services.

Every error carries a machine-readable code and a context dictionary so the
command-line front-end can emit an error record instead of a traceback.
"""
from typing import Any, Dict, Optional


class SpectralError(Exception):
    """Base class for solver errors."""

    code = "spectral_error"

    def __init__(self, message: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.context = dict(context or {})

    def to_record(self) -> Dict[str, Any]:
        """Serializable error record."""
        return {
            "error": self.code,
            "message": self.message,
            "context": {k: _plain(v) for k, v in self.context.items()},
        }


def _plain(value: Any) -> Any:
    if isinstance(value, complex):
        return {"re": value.real, "im": value.imag}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if hasattr(value, "item"):
        return _plain(value.item())
    return value


class InvalidParameter(SpectralError):
    code = "invalid_parameter"


class IndexOutOfRange(SpectralError):
    code = "index_out_of_range"


class PoleProximity(SpectralError):
    """Energy inside the guard band of an unperturbed level."""
    code = "pole_proximity"


class CutViolation(SpectralError):
    """Real energy on the continuum with no side-selecting closed form."""
    code = "cut_violation"


class Unsupported(SpectralError):
    code = "unsupported"


class ZeroOfPhi(SpectralError):
    """The principal function vanishes, the energy is a perturbed eigenvalue."""
    code = "zero_of_phi"


class NotARoot(SpectralError):
    code = "not_a_root"


class WindowTooNarrow(SpectralError):
    code = "window_too_narrow"


class NodeLevel(SpectralError):
    """The unperturbed eigenfunction vanishes at the support."""
    code = "node_level"


class NonRenormalizedProblem(SpectralError):
    code = "non_renormalized_problem"


class DimensionMismatch(SpectralError):
    code = "dimension_mismatch"


class IllConditioned(SpectralError):
    code = "ill_conditioned"


class QuadratureFailure(SpectralError):
    code = "quadrature_failure"


class NoRootInWindow(SpectralError):
    code = "no_root_in_window"


class ConfigError(SpectralError):
    code = "config_error"
