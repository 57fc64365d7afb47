"""Exception types shared across the package."""


class AdmissibilityError(ValueError):
    """The arithmetic configuration is inadmissible (bad modulus or prime pool)."""


class NotGeneratorError(ValueError):
    """A supplied root is not a generator of the corresponding unit group."""


class LevelMismatchError(ValueError):
    """Operands live at incompatible levels."""


class NotHomomorphismError(ValueError):
    """A claimed module homomorphism does not respect the source relations."""


class WindowError(ValueError):
    """A truncation window is too small for the requested computation."""


class ContradictionError(RuntimeError):
    """A machine-verified statement failed.

    This is never expected on a correct build: it signals either an
    implementation bug or a genuine counterexample, and is reported with a
    dedicated exit code by the command line driver.
    """
