"""A small PKI world: one authority, one manufacturer, any number of devices."""

from __future__ import annotations

from .authority import Manufacturer, RootAuthority
from .crypto import ADDR_PUBLIC, DeviceAddress, generate_keypair, random_bytes
from .key_update import DeviceKeystore, UpdatePackage, build_update


class Deployment:
    def __init__(self, rng=None):
        self.rng = rng
        self.authority = RootAuthority.init_root(rng)
        self.manufacturer = Manufacturer.create(rng)
        self.authority.register_manufacturer(self.manufacturer.public_key)

    @property
    def root_key(self):
        return self.authority.public_key

    def provision(self, mac: bytes | None = None, addr_type: int = ADDR_PUBLIC) -> DeviceKeystore:
        """Enroll a new chip: key pair, factory secret, countersigned request, certificate."""
        if mac is None:
            mac = random_bytes(self.rng, 6)
        keypair = generate_keypair(self.rng)
        secret = random_bytes(self.rng, 16)
        request = self.manufacturer.request(mac, keypair.public.x_bytes, self.rng)
        cert = self.authority.issue(request)
        self.manufacturer.device_secrets[bytes(mac)] = secret
        return DeviceKeystore(DeviceAddress(bytes(mac), addr_type), secret, keypair, cert)

    def rotation_package(self, serial: bytes, now: int) -> UpdatePackage:
        """Generate a replacement key, have it re-certified and seal it for the device."""
        keypair = generate_keypair(self.rng)
        request = self.manufacturer.request(serial, keypair.public.x_bytes, self.rng)
        cert = self.authority.reissue(request)
        return build_update(self.manufacturer, serial, keypair, cert, now, self.rng)
