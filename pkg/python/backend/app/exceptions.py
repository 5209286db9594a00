"""
Domain errors.

Everything raised on purpose by the services derives from JacobiChainError so the
CLI can map it to an exit code; the ValueError / RuntimeError bases keep plain
``except ValueError`` callers working.
"""


class JacobiChainError(Exception):
    """Base for all jacobichain errors."""


class InvalidSpec(JacobiChainError, ValueError):
    """A family parameter (or run option) violates its constraint."""


class OutOfSupport(JacobiChainError, ValueError):
    """A site, degree or lattice point outside the finite support."""


class NonTerminating(JacobiChainError, ValueError):
    """A hypergeometric series with no non-positive integer numerator parameter."""


class DenominatorPole(JacobiChainError, ValueError):
    """A denominator Pochhammer vanishes before the series has terminated."""


class ZeroScale(JacobiChainError, ValueError):
    """Affine transform with lambda = 0."""


class ConvergenceFailure(JacobiChainError, RuntimeError):
    """The tridiagonal eigensolver ran out of iterations."""
