"""Simulated link with an active attacker sitting between central and peripheral.

Every frame an endpoint emits goes through the adversary, which returns the
deliveries it wants to make: the frame unchanged, a modified copy, nothing,
or frames injected toward either endpoint. The attacker controls the link but
cannot read provisioned private keys or forge signatures under the real root.
Turns strictly alternate between the two directions, so a run is fully
determined by its seed.
"""

from __future__ import annotations

import enum
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Optional

from .certificate import sign_certificate
from .crypto import DeviceAddress, generate_keypair
from .deploy import Deployment
from .errors import AuthFailure, DuplicateSerial, MalformedMessage, ReplayDetected
from .pairing import Opcode, PairingContext, Role, State, WireMessage

C2P = "C->P"
P2C = "P->C"

Delivery = tuple[str, bytes]


class Outcome(enum.Enum):
    ESTABLISHED_SECURELY = "EstablishedSecurely"
    ABORTED = "AbortedWithReason"
    COMPROMISED = "CompromiseDetectedByHarness"


@dataclass
class TranscriptEntry:
    direction: str
    original: bytes
    delivered: list[Delivery]
    central_state: State
    peripheral_state: State

    @property
    def modified(self) -> bool:
        return self.delivered != [(self.direction, self.original)]

    @property
    def label(self) -> str:
        try:
            return WireMessage.decode(self.original).describe()
        except MalformedMessage:
            return f"<{len(self.original)} bytes>"

    def describe(self) -> str:
        label = self.label
        flag = " *modified*" if self.modified else ""
        return (f"{self.direction}  {label:<22}{flag}  "
                f"[central={self.central_state.name} peripheral={self.peripheral_state.name}]")


@dataclass
class Scenario:
    """What the attacker can observe about the victims before the run."""

    deployment: Deployment
    central_address: DeviceAddress
    peripheral_address: DeviceAddress
    cert_auth: bool
    rng: random.Random


# ---------------------------------------------------------------------------
# Strategies
# ---------------------------------------------------------------------------

class Adversary:
    name = "abstract"

    def prepare(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.rng = scenario.rng
        self.notes: list[str] = []

    def intercept(self, direction: str, frame: bytes) -> list[Delivery]:
        return [(direction, frame)]

    def attacker_ltks(self) -> list[bytes]:
        return []


class Passive(Adversary):
    name = "passive"


def _forge_certificate(rng, serial: bytes, subject_key: bytes, self_signed_key: Optional[int] = None):
    """A certificate for ``serial`` signed by a key the real root never vouched for."""
    signer = self_signed_key if self_signed_key is not None else generate_keypair(rng).private
    return sign_certificate(signer, serial, subject_key)


class CertSubstitute(Adversary):
    """Swap one endpoint's certificate (or raw key) for an attacker-made one."""

    name = "cert-sub"

    def prepare(self, scenario):
        super().prepare(scenario)
        self.keypair = generate_keypair(self.rng)
        self.target = self.rng.choice([P2C, C2P])
        self.self_signed = self.rng.random() < 0.5
        victim = scenario.peripheral_address if self.target == P2C else scenario.central_address
        self.forged = _forge_certificate(
            self.rng, victim.addr, self.keypair.public.x_bytes,
            self.keypair.private if self.self_signed else None,
        )
        kind = "self-signed" if self.self_signed else "foreign-root"
        self.notes.append(f"replacing {'peripheral' if self.target == P2C else 'central'} key with {kind} certificate")

    def intercept(self, direction, frame):
        if direction != self.target:
            return [(direction, frame)]
        op = frame[0]
        if op in (Opcode.CERT_CENTRAL, Opcode.CERT_PERIPHERAL):
            return [(direction, bytes([op]) + self.forged.encode())]
        if op in (Opcode.PUBKEY_CENTRAL, Opcode.PUBKEY_PERIPHERAL):
            return [(direction, bytes([op]) + self.keypair.public.x_bytes)]
        return [(direction, frame)]


class KeySubstitute(Adversary):
    """Classic MITM: run a separate pairing with each victim using attacker keys."""

    name = "key-sub"

    def prepare(self, scenario):
        super().prepare(scenario)
        c_addr, p_addr = scenario.central_address, scenario.peripheral_address
        self.fake_peripheral = self._endpoint(Role.PERIPHERAL, p_addr, c_addr.addr)
        self.fake_central = self._endpoint(Role.CENTRAL, c_addr, p_addr.addr)
        self.started = False

    def _endpoint(self, role, spoofed: DeviceAddress, peer_mac: bytes) -> PairingContext:
        keypair = generate_keypair(self.rng)
        cert = _forge_certificate(self.rng, spoofed.addr, keypair.public.x_bytes)
        return PairingContext(role, keypair, spoofed, peer_mac, cert, self.scenario.deployment.root_key,
                              self.rng, cert_auth=self.scenario.cert_auth)

    def intercept(self, direction, frame):
        out: list[Delivery] = []
        if direction == C2P:
            out += [(P2C, m.encode()) for m in self.fake_peripheral.handle_message(frame)]
            if not self.started:
                self.started = True
                out.append((C2P, self.fake_central.start_pairing().encode()))
        else:
            out += [(C2P, m.encode()) for m in self.fake_central.handle_message(frame)]
        return out

    def attacker_ltks(self):
        return [ctx.ltk() for ctx in (self.fake_peripheral, self.fake_central) if ctx.state is State.ESTABLISHED]


class NonceTamper(Adversary):
    """Flip bits in a nonce or confirm value in transit.

    ``target`` selects the frame: ``"peripheral"`` (N_p), ``"confirm"`` (C_p)
    or ``"central"`` (N_c).
    """

    name = "nonce-tamper"
    _OPS = {"peripheral": Opcode.NONCE_PERIPHERAL, "confirm": Opcode.CONFIRM, "central": Opcode.NONCE_CENTRAL}

    def __init__(self, target: str = "peripheral"):
        self.target = target
        self.opcode = self._OPS[target]

    def prepare(self, scenario):
        super().prepare(scenario)
        mask = bytearray(self.rng.randbytes(16))
        if not any(mask):
            mask[0] = 1
        self.mask = bytes(mask)

    def intercept(self, direction, frame):
        if frame and frame[0] == self.opcode and len(frame) == 17:
            return [(direction, frame[:1] + bytes(a ^ b for a, b in zip(frame[1:], self.mask)))]
        return [(direction, frame)]


class AddressSpoof(KeySubstitute):
    """Impersonate the peripheral by its MAC address.

    The attacker first tries to enroll the victim's MAC under its own key
    through a registered manufacturer, then answers the central's connection
    itself using the victim's address.
    """

    name = "addr-spoof"

    def prepare(self, scenario):
        Adversary.prepare(self, scenario)
        dep = scenario.deployment
        c_addr, p_addr = scenario.central_address, scenario.peripheral_address
        keypair = generate_keypair(self.rng)
        try:
            cert = dep.authority.issue(dep.manufacturer.request(p_addr.addr, keypair.public.x_bytes, self.rng))
            self.notes.append("issuance for spoofed MAC succeeded")
        except DuplicateSerial:
            self.notes.append("issuance for spoofed MAC refused: DuplicateSerial")
            # fall back to a genuine certificate for the attacker's own chip
            own = dep.provision()
            keypair, cert = own.keypair, own.certificate
        self.fake_peripheral = PairingContext(
            Role.PERIPHERAL, keypair, p_addr, c_addr.addr, cert, dep.root_key, self.rng,
            cert_auth=scenario.cert_auth,
        )
        self.fake_central = None

    def intercept(self, direction, frame):
        if direction == C2P:
            return [(P2C, m.encode()) for m in self.fake_peripheral.handle_message(frame)]
        return []

    def attacker_ltks(self):
        return [self.fake_peripheral.ltk()] if self.fake_peripheral.state is State.ESTABLISHED else []


STRATEGIES = {
    "passive": Passive,
    "cert-sub": CertSubstitute,
    "key-sub": KeySubstitute,
    "nonce-tamper": NonceTamper,
    "addr-spoof": AddressSpoof,
}


def make_adversary(strategy) -> Adversary:
    if isinstance(strategy, Adversary):
        return strategy
    try:
        return STRATEGIES[strategy]()
    except KeyError:
        raise ValueError(f"unknown strategy {strategy!r}; choose from {', '.join(STRATEGIES)}") from None


# ---------------------------------------------------------------------------
# Link and scenario runner
# ---------------------------------------------------------------------------

class SimLink:
    def __init__(self, central: PairingContext, peripheral: PairingContext, adversary: Optional[Adversary] = None):
        self.central = central
        self.peripheral = peripheral
        self.adversary = adversary or Passive()
        self.queues = {C2P: deque(), P2C: deque()}
        self.transcript: list[TranscriptEntry] = []

    def _endpoint(self, direction: str) -> PairingContext:
        return self.peripheral if direction == C2P else self.central

    def _deliver(self, direction: str, frame: bytes) -> None:
        receiver = self._endpoint(direction)
        back = P2C if direction == C2P else C2P
        for reply in receiver.handle_message(frame):
            self.queues[back].append(reply.encode())

    def run(self, max_frames: int = 200) -> list[TranscriptEntry]:
        self.queues[C2P].append(self.central.start_pairing().encode())
        sent = 0
        while any(self.queues.values()) and sent < max_frames:
            for direction in (C2P, P2C):
                if not self.queues[direction]:
                    continue
                frame = self.queues[direction].popleft()
                sent += 1
                deliveries = self.adversary.intercept(direction, frame)
                for target, data in deliveries:
                    self._deliver(target, data)
                self.transcript.append(
                    TranscriptEntry(direction, frame, deliveries, self.central.state, self.peripheral.state)
                )
        return self.transcript


@dataclass
class ScenarioReport:
    scenario: str
    seed: int
    baseline: bool
    outcome: Outcome
    frames: int
    abort_reason: Optional[str] = None
    ltk_equal: Optional[bool] = None
    central_state: str = ""
    peripheral_state: str = ""
    keys_on_wire: bool = False
    notes: list[str] = field(default_factory=list)
    transcript: list[TranscriptEntry] = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "baseline": self.baseline,
            "outcome": self.outcome.value,
            "abort_reason": self.abort_reason,
            "frames": self.frames,
            "ltk_equal": self.ltk_equal,
            "central_state": self.central_state,
            "peripheral_state": self.peripheral_state,
            "keys_on_wire": self.keys_on_wire,
            "notes": list(self.notes),
        }


@dataclass
class ScenarioRun:
    """Everything a run produced, for harness checks beyond the report."""

    report: ScenarioReport
    link: SimLink
    central: PairingContext
    peripheral: PairingContext
    adversary: Adversary
    secrets: list[bytes]


def _reason(central: PairingContext, peripheral: PairingContext) -> str:
    for ctx in (central, peripheral):
        if ctx.state is State.FAILED and ctx.failed_locally:
            return ctx.failure.label
    for ctx in (central, peripheral):
        if ctx.failure is not None:
            return ctx.failure.label
    return "Stalled"


def _link_probe(central: PairingContext, peripheral: PairingContext) -> bool:
    """Exchange one encrypted frame each way; False if the LTKs do not line up."""
    c, p = central.channel(), peripheral.channel()
    try:
        return p.open(c.seal(b"probe")) == b"probe" and c.open(p.seal(b"probe")) == b"probe"
    except (AuthFailure, ReplayDetected):
        return False


def _leaks(transcript: list[TranscriptEntry], secrets: list[bytes]) -> bool:
    for entry in transcript:
        frames = [entry.original] + [d for _, d in entry.delivered]
        if any(s in f for s in secrets for f in frames):
            return True
    return False


def execute(strategy, seed: int, baseline: bool = False) -> ScenarioRun:
    adversary = make_adversary(strategy)
    cert_auth = not baseline
    world_rng = random.Random(f"world-{seed}")
    dep = Deployment(world_rng)
    central_ks = dep.provision()
    peripheral_ks = dep.provision()
    central = central_ks.pairing_context(Role.CENTRAL, peripheral_ks.serial, dep.root_key,
                                         random.Random(f"central-{seed}"), cert_auth)
    peripheral = peripheral_ks.pairing_context(Role.PERIPHERAL, central_ks.serial, dep.root_key,
                                               random.Random(f"peripheral-{seed}"), cert_auth)
    adversary.prepare(Scenario(dep, central_ks.address, peripheral_ks.address, cert_auth,
                               random.Random(f"adversary-{seed}")))
    link = SimLink(central, peripheral, adversary)
    transcript = link.run()

    report = ScenarioReport(
        scenario=adversary.name,
        seed=seed,
        baseline=baseline,
        outcome=Outcome.ABORTED,
        frames=len(transcript),
        central_state=central.state.name,
        peripheral_state=peripheral.state.name,
        notes=list(adversary.notes),
        transcript=transcript,
    )
    secrets = [central_ks.keypair.private.to_bytes(32, "big"), peripheral_ks.keypair.private.to_bytes(32, "big")]

    stolen = set(adversary.attacker_ltks())
    honest_ltks = [ctx.ltk() for ctx in (central, peripheral) if ctx.state is State.ESTABLISHED]
    secrets += honest_ltks
    if stolen and any(k in stolen for k in honest_ltks):
        report.outcome = Outcome.COMPROMISED
        report.ltk_equal = len(honest_ltks) == 2 and honest_ltks[0] == honest_ltks[1]
        report.notes.append(f"attacker shares keys with {sum(k in stolen for k in honest_ltks)} endpoint(s)")
    elif len(honest_ltks) == 2:
        report.ltk_equal = honest_ltks[0] == honest_ltks[1]
        if _link_probe(central, peripheral):
            report.outcome = Outcome.ESTABLISHED_SECURELY
        else:
            report.abort_reason = "SessionAuthFailure"
    else:
        report.abort_reason = _reason(central, peripheral)

    report.keys_on_wire = _leaks(transcript, secrets)
    return ScenarioRun(report, link, central, peripheral, adversary, secrets)


def run_scenario(strategy, seed: int) -> ScenarioReport:
    """Run the certificate-authenticated handshake under ``strategy``."""
    return execute(strategy, seed, baseline=False).report


def run_baseline_justworks(strategy, seed: int) -> ScenarioReport:
    """Same attack against unauthenticated Just Works pairing."""
    return execute(strategy, seed, baseline=True).report


def run_trials(strategy: str, seed: int, trials: int, baseline: bool = False) -> list[ScenarioReport]:
    runner = run_baseline_justworks if baseline else run_scenario
    return [runner(strategy, seed + i) for i in range(trials)]
