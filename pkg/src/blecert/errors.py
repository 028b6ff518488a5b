"""Exception hierarchy shared by all blecert modules."""


class BleCertError(Exception):
    """Base class for every error raised by this package."""


# crypto
class RandomnessFailure(BleCertError):
    pass


class InvalidPoint(BleCertError):
    pass


class IdentityResult(BleCertError):
    pass


class ZeroSecret(BleCertError):
    pass


class AuthFailure(BleCertError):
    pass


class ReplayDetected(BleCertError):
    pass


# certificate encoding
class CertificateFormatError(BleCertError):
    pass


class BadLength(CertificateFormatError):
    pass


class BadVersion(CertificateFormatError):
    pass


# authority
class RequestRejected(BleCertError):
    pass


class DuplicateSerial(BleCertError):
    pass


class DuplicateManufacturer(BleCertError):
    pass


class BadSubjectKey(BleCertError):
    pass


class UnknownSerial(BleCertError):
    pass


# pairing
class PairingError(BleCertError):
    pass


class WrongRole(PairingError):
    pass


class WrongState(PairingError):
    pass


class NotEstablished(PairingError):
    pass


class MalformedMessage(PairingError):
    pass


# key update
class UnknownDevice(BleCertError):
    pass


# energy
class BadFragmentCount(BleCertError, ValueError):
    pass
