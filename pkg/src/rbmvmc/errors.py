"""Exception types shared across the package."""


class VmcError(Exception):
    """Base class for errors raised by this package."""


class SingularAmplitude(VmcError):
    """The wavefunction amplitude is zero, so its logarithm is undefined."""


class FrozenSector(VmcError):
    """No magnetization-conserving move exists (configuration fully polarized)."""


class IllConditioned(VmcError):
    """A regularized linear solve failed or violated its residual bound."""


class NotHermitian(VmcError):
    """A matrix expected to be Hermitian is not, beyond tolerance."""


class ZeroWeightBlock(VmcError):
    """An eigenvector's weight block has near-zero norm; entanglement undefined."""


class SystemTooLarge(VmcError):
    """The system exceeds the exact-enumeration size cap."""


class NonFiniteEnergy(VmcError):
    """An optimization run produced a non-finite energy estimate."""
