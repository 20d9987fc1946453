"""
dimerfold Exception Hierarchy.

Structured exception classes for the dimer machinery.
All exceptions inherit from DimerFoldError for easy catching.

Version: 0.1.0

Exception Hierarchy:
    DimerFoldError (base)
    ├── ConfigError
    │   ├── ConfigNotFoundError
    │   ├── ConfigParseError
    │   └── ConfigValidationError
    ├── LatticeError
    │   ├── DomainError
    │   └── GraphError
    ├── KasteleynError
    │   ├── PhaseError
    │   └── ConnectionDataError
    ├── NumericalError
    │   ├── NotSkewError
    │   ├── OddDimensionError
    │   ├── SingularMatrixError
    │   ├── SeriesDivergenceError
    │   └── QuadratureError
    ├── OracleError
    │   ├── EnumerationCapError
    │   └── InvariantError
    ├── SamplerError
    ├── ZipperError
    ├── ToleranceError
    └── CLIError
"""

from typing import Any


class DimerFoldError(Exception):
    """
    Base exception for all dimerfold errors.

    Attributes:
        message: Human-readable error message
        code: Error code for programmatic handling
        details: Additional error context
    """

    def __init__(
        self,
        message: str,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message)
        self.message = message
        self.code = code or "DIMERFOLD_ERROR"
        self.details = details or {}

    def __str__(self) -> str:
        if self.details:
            return f"[{self.code}] {self.message} - {self.details}"
        return f"[{self.code}] {self.message}"

    def to_dict(self) -> dict[str, Any]:
        """Convert exception to dictionary for serialization."""
        return {
            "error": self.code,
            "message": self.message,
            "details": self.details,
        }


# =============================================================================
# Config Errors
# =============================================================================


class ConfigError(DimerFoldError):
    """Base error for configuration operations."""

    def __init__(
        self,
        message: str,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, code or "CONFIG_ERROR", details)


class ConfigNotFoundError(ConfigError):
    """Configuration file not found."""

    def __init__(
        self,
        path: str,
        message: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        details["config_path"] = path
        super().__init__(
            message or f"Config file not found: {path}",
            "CONFIG_NOT_FOUND",
            details,
        )


class ConfigParseError(ConfigError):
    """Configuration parsing failed."""

    def __init__(
        self,
        path: str,
        message: str | None = None,
        parse_error: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        details["config_path"] = path
        if parse_error:
            details["parse_error"] = parse_error
        super().__init__(
            message or f"Failed to parse config: {path}",
            "CONFIG_PARSE_ERROR",
            details,
        )


class ConfigValidationError(ConfigError):
    """Configuration values failed schema validation."""

    def __init__(
        self,
        message: str,
        errors: list[str] | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if errors:
            details["validation_errors"] = errors
        super().__init__(message, "CONFIG_VALIDATION_ERROR", details)


# =============================================================================
# Lattice Errors
# =============================================================================


class LatticeError(DimerFoldError):
    """Base error for lattice domains and graphs."""

    def __init__(
        self,
        message: str,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, code or "LATTICE_ERROR", details)


class DomainError(LatticeError):
    """Domain descriptor is invalid (asymmetric, not simply connected, ...)."""

    def __init__(
        self,
        message: str,
        descriptor: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if descriptor:
            details["descriptor"] = descriptor
        super().__init__(message, "DOMAIN_ERROR", details)


class GraphError(LatticeError):
    """Graph has the wrong variant or structure for the operation."""

    def __init__(
        self,
        message: str,
        variant: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if variant:
            details["variant"] = variant
        super().__init__(message, "GRAPH_ERROR", details)


# =============================================================================
# Kasteleyn Errors
# =============================================================================


class KasteleynError(DimerFoldError):
    """Base error for phases, connections and matrix assembly."""

    def __init__(
        self,
        message: str,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, code or "KASTELEYN_ERROR", details)


class PhaseError(KasteleynError):
    """No valid Kasteleyn phase assignment, or an invalid gauge."""

    def __init__(
        self,
        message: str,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, "PHASE_ERROR", details)


class ConnectionDataError(KasteleynError):
    """Connection or boundary data missing or inconsistent."""

    def __init__(
        self,
        message: str,
        edge: Any | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if edge is not None:
            details["edge"] = repr(edge)
        super().__init__(message, "CONNECTION_DATA_ERROR", details)


# =============================================================================
# Numerical Errors
# =============================================================================


class NumericalError(DimerFoldError):
    """Base error for numerical kernels."""

    def __init__(
        self,
        message: str,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, code or "NUMERICAL_ERROR", details)


class NotSkewError(NumericalError):
    """Input matrix is not skew-symmetric."""

    def __init__(
        self,
        deviation: float,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        details["max_deviation"] = deviation
        super().__init__("Matrix is not skew-symmetric", "NOT_SKEW", details)


class OddDimensionError(NumericalError):
    """Skew matrix of odd dimension; its Pfaffian is zero by convention."""

    def __init__(
        self,
        dimension: int,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        details["dimension"] = dimension
        super().__init__(
            f"Pfaffian of odd dimension {dimension} is zero",
            "ODD_DIMENSION",
            details,
        )


class SingularMatrixError(NumericalError):
    """Matrix is numerically singular."""

    def __init__(
        self,
        condition: float,
        message: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        details["condition_estimate"] = condition
        super().__init__(
            message or "Matrix is numerically singular",
            "SINGULAR_MATRIX",
            details,
        )


class SeriesDivergenceError(NumericalError):
    """Series evaluated outside its radius of convergence."""

    def __init__(
        self,
        alpha: float,
        spectral_radius: float,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        details["alpha"] = alpha
        details["spectral_radius"] = spectral_radius
        super().__init__(
            f"Series diverges at alpha={alpha:g}",
            "SERIES_DIVERGENCE",
            details,
        )


class QuadratureError(NumericalError):
    """Quadrature did not converge under node doubling."""

    def __init__(
        self,
        message: str,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, "QUADRATURE_ERROR", details)


# =============================================================================
# Oracle Errors
# =============================================================================


class OracleError(DimerFoldError):
    """Base error for brute-force oracles."""

    def __init__(
        self,
        message: str,
        code: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, code or "ORACLE_ERROR", details)


class EnumerationCapError(OracleError):
    """Enumeration exceeded the configured vertex or matching cap."""

    def __init__(
        self,
        message: str,
        limit: int | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if limit is not None:
            details["limit"] = limit
        super().__init__(message, "ENUMERATION_CAP", details)


class InvariantError(OracleError):
    """An identity that must hold for every configuration was violated."""

    def __init__(
        self,
        message: str,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, "INVARIANT_VIOLATED", details)


# =============================================================================
# Sampling, Zipper, Verification Errors
# =============================================================================


class SamplerError(DimerFoldError):
    """Sampler cannot run on the given graph."""

    def __init__(
        self,
        message: str,
        method: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if method:
            details["method"] = method
        super().__init__(message, "SAMPLER_ERROR", details)


class ZipperError(DimerFoldError):
    """Zipper path is invalid for the host graph."""

    def __init__(
        self,
        message: str,
        details: dict[str, Any] | None = None,
    ) -> None:
        super().__init__(message, "ZIPPER_ERROR", details)


class ToleranceError(DimerFoldError):
    """A verification exceeded its tolerance."""

    def __init__(
        self,
        message: str,
        error: float | None = None,
        tolerance: float | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if error is not None:
            details["error"] = error
        if tolerance is not None:
            details["tolerance"] = tolerance
        super().__init__(message, "TOLERANCE_EXCEEDED", details)


class CLIError(DimerFoldError):
    """CLI service error."""

    def __init__(
        self,
        message: str,
        command: str | None = None,
        details: dict[str, Any] | None = None,
    ) -> None:
        details = details or {}
        if command:
            details["command"] = command
        super().__init__(message, "CLI_ERROR", details)
