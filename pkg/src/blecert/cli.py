"""Command-line entry point: ``blecert <subcommand>``."""

from __future__ import annotations

import json
import random
import time
from pathlib import Path

import click

from . import adversary, energy
from .authority import IssuanceRequest, RootAuthority, make_request_signature
from .certificate import (
    CertStatus,
    load_certificate,
    read_certificate_bytes,
    decode,
    save_certificate,
    size_report,
    verify_cert,
)
from .crypto import (
    DeviceAddress,
    Signature,
    format_mac,
    generate_keypair,
    load_keypair,
    read_public_key,
    write_private_key,
    write_public_key,
)
from .errors import BleCertError
from .key_update import DEFAULT_WINDOW, DeviceKeystore, apply_update, build_update

DEFAULT_HOME = ".blecert"


class _Group(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (BleCertError, ValueError, OSError) as exc:
            raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc


def _rng(seed):
    return random.Random(seed) if seed is not None else None


def _emit(obj) -> None:
    click.echo(json.dumps(obj, indent=2, sort_keys=True))


def _mac(text: str) -> bytes:
    try:
        return DeviceAddress.parse(text).addr
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint="--mac")


@click.group(cls=_Group)
@click.option("--home", type=click.Path(file_okay=False, path_type=Path), envvar="BLE_CERTAUTH_HOME",
              default=DEFAULT_HOME, show_default=True, help="Authority state directory.")
@click.pass_context
def main(ctx, home):
    """Certificate-authenticated BLE Just Works pairing toolkit."""
    ctx.obj = {"home": home}


@main.command()
@click.option("--out", required=True, help="Path prefix; writes PREFIX.key and PREFIX.pub.")
@click.option("--seed", type=int)
def keygen(out, seed):
    """Generate an even-y P-256 key pair."""
    kp = generate_keypair(_rng(seed))
    write_private_key(f"{out}.key", kp.private)
    write_public_key(f"{out}.pub", kp.public)
    click.echo(kp.public.hex())


# -- authority ---------------------------------------------------------------

@main.group(cls=_Group)
def bleca():
    """Certification authority operations."""


def _authority(ctx) -> RootAuthority:
    home = ctx.obj["home"]
    if not (home / "root.key").exists():
        raise click.ClickException(f"no authority in {home}; run 'blecert bleca init' first")
    return RootAuthority.load(home)


@bleca.command("init")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), help="Directory (default: --home).")
@click.option("--seed", type=int)
@click.pass_context
def bleca_init(ctx, out, seed):
    """Create a root key and an empty registry."""
    home = out or ctx.obj["home"]
    if (home / "root.key").exists():
        raise click.ClickException(f"{home} already holds an authority")
    authority = RootAuthority.init_root(_rng(seed), home)
    click.echo(authority.public_key.hex())


@bleca.command("root")
@click.pass_context
def bleca_root(ctx):
    """Print the root public key (64 hex chars) for device provisioning."""
    click.echo(_authority(ctx).public_key.hex())


@bleca.command("register")
@click.option("--manufacturer-key", required=True, type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def bleca_register(ctx, manufacturer_key):
    """Register a manufacturer's public key."""
    click.echo(_authority(ctx).register_manufacturer(read_public_key(manufacturer_key)))


@bleca.command("sign-request")
@click.option("--manufacturer-key", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Manufacturer private key file.")
@click.option("--mac", required=True)
@click.option("--subject-key", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int)
def bleca_sign_request(manufacturer_key, mac, subject_key, out, seed):
    """Countersign an issuance request as a manufacturer."""
    kp = load_keypair(manufacturer_key)
    sig = make_request_signature(kp.private, _mac(mac), read_public_key(subject_key).x_bytes, _rng(seed))
    Path(out).write_text(sig.to_bytes().hex() + "\n")


def _request_options(fn):
    fn = click.option("--out", type=click.Path(dir_okay=False), help="Write the hex-armored certificate here.")(fn)
    fn = click.option("--request-sig", required=True, type=click.Path(exists=True, dir_okay=False))(fn)
    fn = click.option("--subject-key", required=True, type=click.Path(exists=True, dir_okay=False))(fn)
    return click.option("--mac", required=True)(fn)


def _sign(ctx, mac, subject_key, request_sig, out, rotate):
    sig = Signature.from_bytes(bytes.fromhex(Path(request_sig).read_text().strip()))
    request = IssuanceRequest(_mac(mac), read_public_key(subject_key).x_bytes, sig)
    authority = _authority(ctx)
    cert = authority.reissue(request) if rotate else authority.issue(request)
    if out:
        save_certificate(out, cert)
    click.echo(cert.hex())


@bleca.command("issue")
@_request_options
@click.pass_context
def bleca_issue(ctx, mac, subject_key, request_sig, out):
    """Issue a certificate for a manufacturer-countersigned request."""
    _sign(ctx, mac, subject_key, request_sig, out, rotate=False)


@bleca.command("reissue")
@_request_options
@click.pass_context
def bleca_reissue(ctx, mac, subject_key, request_sig, out):
    """Re-certify an enrolled MAC under a new key (for key rotation)."""
    _sign(ctx, mac, subject_key, request_sig, out, rotate=True)


@bleca.command("lookup")
@click.option("--mac", required=True)
@click.pass_context
def bleca_lookup(ctx, mac):
    """Print the certificate issued for a MAC address."""
    cert = _authority(ctx).lookup(_mac(mac))
    if cert is None:
        raise click.ClickException(f"no certificate for {mac.upper()}")
    click.echo(cert.hex())


# -- certificates ------------------------------------------------------------

@main.command()
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.option("--root", "root_path", type=click.Path(exists=True, dir_okay=False),
              help="Root public key file (default: the authority in --home, if any).")
@click.option("--json", "as_json", is_flag=True)
@click.pass_context
def certinfo(ctx, path, root_path, as_json):
    """Show a certificate's fields and verification status."""
    data = read_certificate_bytes(path)
    cert = decode(data)
    default_root = ctx.obj["home"] / "root.pub"
    if root_path is None and default_root.exists():
        root_path = default_root
    status = verify_cert(cert, read_public_key(root_path)).value if root_path else "unchecked"
    info = {
        "size": len(data),
        "version": cert.version,
        "serial": cert.mac,
        "subject_public_key": cert.subject_key.hex(),
        "signature": cert.signature.to_bytes().hex(),
        "status": status,
    }
    if as_json:
        _emit(info)
    else:
        for key, value in info.items():
            click.echo(f"{key:<20}{value}")
    if status not in (CertStatus.VALID.value, "unchecked"):
        ctx.exit(1)


@main.command("size-report")
@click.option("--json", "as_json", is_flag=True)
def size_report_cmd(as_json):
    """Compare field sizes with an unprofiled X.509 v3 certificate."""
    report = size_report()
    if as_json:
        _emit(report.to_dict())
    else:
        click.echo(report.render())


# -- pairing and attacks -----------------------------------------------------

def _transcript_rows(entries):
    rows = []
    for e in entries:
        rows.append({
            "direction": e.direction,
            "frame": e.original.hex(),
            "message": e.label,
            "modified": e.modified,
            "central_state": e.central_state.name,
            "peripheral_state": e.peripheral_state.name,
        })
    return rows


@main.command("pair-demo")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--reveal-keys", is_flag=True, help="Print the derived LTK.")
@click.option("--json", "as_json", is_flag=True)
def pair_demo(seed, reveal_keys, as_json):
    """Run one honest handshake and print the transcript."""
    run = adversary.execute("passive", seed)
    ltk = run.central.ltk().hex() if run.central.state.name == "ESTABLISHED" else None
    shown = ltk if reveal_keys else ("<redacted>" if ltk else None)
    if as_json:
        doc = run.report.to_dict()
        doc["transcript"] = _transcript_rows(run.report.transcript)
        doc["ltk"] = shown
        _emit(doc)
        return
    click.echo(f"seed {seed}: central {format_mac(run.central.address.addr)} "
               f"<-> peripheral {format_mac(run.peripheral.address.addr)}")
    for entry in run.report.transcript:
        click.echo("  " + entry.describe())
    click.echo(f"outcome: {run.report.outcome.value}")
    click.echo(f"LTK: {shown}" + ("" if reveal_keys else "  (use --reveal-keys to show)"))


@main.command("attack-demo")
@click.option("--strategy", type=click.Choice(sorted(adversary.STRATEGIES)), default="key-sub", show_default=True)
@click.option("--baseline", is_flag=True, help="Attack plain Just Works instead of the certificate scheme.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--trials", type=click.IntRange(min=1), default=1, show_default=True)
@click.option("--json", "as_json", is_flag=True)
def attack_demo(strategy, baseline, seed, trials, as_json):
    """Run an adversary against the handshake for one or more seeds."""
    reports = adversary.run_trials(strategy, seed, trials, baseline)
    if as_json:
        _emit([r.to_dict() for r in reports])
        return
    if trials == 1:
        for entry in reports[0].transcript:
            click.echo("  " + entry.describe())
    for r in reports:
        reason = f"({r.abort_reason})" if r.abort_reason else ""
        click.echo(f"seed {r.seed:>6}  {'baseline' if baseline else 'cert-auth'}  {strategy:<12} "
                   f"{r.outcome.value}{reason}")
    counts = {}
    for r in reports:
        counts[r.outcome.value] = counts.get(r.outcome.value, 0) + 1
    click.echo("summary: " + ", ".join(f"{k}={v}" for k, v in sorted(counts.items())))


# -- key rotation ------------------------------------------------------------

@main.group("key-update", cls=_Group)
def key_update_group():
    """Build or apply key rotation packages."""


def _read_secret(path) -> bytes:
    secret = bytes.fromhex(Path(path).read_text().strip())
    if len(secret) != 16:
        raise ValueError(f"{path}: factory secret must be 16 bytes")
    return secret


@key_update_group.command("build")
@click.option("--factory-secret", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--new-key", required=True, type=click.Path(exists=True, dir_okay=False), help="New private key file.")
@click.option("--cert", "cert_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--now", type=int, help="Timestamp to embed (default: current time).")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--seed", type=int)
def key_update_build(factory_secret, new_key, cert_path, now, out, seed):
    """Seal a new key and certificate for one device."""
    cert = load_certificate(cert_path)
    now = int(time.time()) if now is None else now
    pkg = build_update({cert.serial: _read_secret(factory_secret)}, cert.serial, load_keypair(new_key),
                       cert, now, _rng(seed))
    Path(out).write_text(pkg.encode().hex() + "\n")
    click.echo(f"package for {cert.mac} at t={now}")


@key_update_group.command("apply")
@click.option("--factory-secret", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--device-key", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--device-cert", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--package", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--now", type=int, help="Device clock (default: current time).")
@click.option("--window", type=click.IntRange(min=0), default=DEFAULT_WINDOW, show_default=True,
              help="Freshness window in seconds.")
@click.pass_context
def key_update_apply(ctx, factory_secret, device_key, device_cert, package, now, window):
    """Apply a package to a device's key files; they change only on success."""
    cert = load_certificate(device_cert)
    keystore = DeviceKeystore(DeviceAddress(cert.serial), _read_secret(factory_secret), load_keypair(device_key), cert)
    raw = bytes.fromhex(Path(package).read_text().strip())
    result = apply_update(keystore, raw, int(time.time()) if now is None else now, window)
    click.echo(str(result))
    if not result.applied:
        ctx.exit(1)
    write_private_key(device_key, keystore.keypair.private)
    save_certificate(device_cert, keystore.certificate)


# -- energy ------------------------------------------------------------------

@main.command("energy")
@click.option("--params", "params_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="key=value file with e_wu, e_tx, e_rx, e_ifs, e_slp [, l_hdr].")
@click.option("--cert-size", type=click.IntRange(min=1), default=103, show_default=True)
@click.option("--max-payload", type=click.IntRange(min=1), default=energy.BLE_MAX_PAYLOAD, show_default=True)
@click.option("--report", is_flag=True, help="Include the crypto cost table and handshake totals.")
@click.option("--json", "as_json", is_flag=True)
def energy_cmd(params_path, cert_size, max_payload, report, as_json):
    """Estimate certificate transfer energy."""
    params = energy.EnergyParams.from_file(params_path)
    full = energy.energy_report(params, cert_size, max_payload=max_payload)
    if not report:
        full = {k: full[k] for k in ("cert_size", "fragments", "cert_tx_uJ", "cert_rx_uJ")}
    if as_json:
        _emit(full)
    elif report:
        click.echo(energy.render_report(full))
    else:
        click.echo(f"tx {full['cert_tx_uJ']:.3f} uJ  rx {full['cert_rx_uJ']:.3f} uJ  "
                   f"({full['fragments']} fragment(s))")


if __name__ == "__main__":
    main()
