"""Command-line entry point: ``wdmqkd {rates,sweep,validate,network,simulate}``.

Exit codes: 0 success, 1 validation cells failed, 2 configuration error,
3 detector saturation flagged (results are still written).
"""

from __future__ import annotations

import argparse
import io
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .montecarlo import g2_histogram, simulate, write_timetags
from .network import InsufficientPairsError, assign_channels, max_fully_connected_users, write_plan_csv
from .optimizer import sweep_power, total_key_rate
from .validation import run_validation

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_SATURATED = 3


@dataclass
class CommandOutput:
    text: str
    exit_code: int = EXIT_OK


def _stamp(cfg: RunConfig) -> str:
    return f"# wdmqkd {__version__} config_sha256={cfg.digest()}\n"


def _single_scenario(cfg: RunConfig, base_dir):
    scenarios = cfg.scenarios(base_dir)
    if len(scenarios) != 1:
        raise ConfigError("grid.spacing_ghz: this command needs a single spacing, not a list")
    return scenarios[0]


def cmd_rates(cfg: RunConfig, base_dir: Path | None = None) -> CommandOutput:
    """Per-channel rate table at ``source.pump_power_mw``."""
    scenario = _single_scenario(cfg, base_dir)
    result = total_key_rate(scenario, cfg.source.pump_power_mw)
    buf = io.StringIO()
    buf.write(_stamp(cfg))
    buf.write(
        "pair_index,itu_low,itu_high,lambda_low_nm,lambda_high_nm,eta_a,eta_b,"
        "singles_a_cps,singles_b_cps,cc_true_cps,cc_acc_cps,qber,t_cc_ps,secure_rate_bps,saturated\n"
    )
    for pair, ch in zip(scenario.grid.pairs(), result.channels):
        fields = [
            str(pair.index), f"{pair.itu_low:g}", f"{pair.itu_high:g}",
            repr(pair.lambda_low), repr(pair.lambda_high), repr(ch.eta_a), repr(ch.eta_b),
            repr(ch.singles_a), repr(ch.singles_b), repr(ch.cc_true), repr(ch.cc_acc),
            repr(ch.qber), repr(ch.t_cc * 1e12), repr(ch.secure_rate), str(int(ch.saturated)),
        ]
        buf.write(",".join(fields) + "\n")
    buf.write(f"# total_secure_rate_bps={result.total!r}\n")
    return CommandOutput(buf.getvalue(), EXIT_SATURATED if result.saturated else EXIT_OK)


def cmd_sweep(cfg: RunConfig, base_dir: Path | None = None) -> CommandOutput:
    """Total key rate against pump power for every configured spacing."""
    buf = io.StringIO()
    buf.write(_stamp(cfg))
    buf.write("power_mw,total_bps,spacing_ghz,n_pairs\n")
    saturated = False
    for spacing_ghz, scenario in zip(cfg.grid.spacings_ghz, cfg.scenarios(base_dir)):
        sweep = sweep_power(scenario)
        saturated |= sweep.saturated
        for p, total in zip(sweep.powers.tolist(), sweep.totals.tolist()):
            buf.write(f"{p!r},{total!r},{spacing_ghz:g},{sweep.num_pairs}\n")
    return CommandOutput(buf.getvalue(), EXIT_SATURATED if saturated else EXIT_OK)


def cmd_validate(cfg: RunConfig, base_dir: Path | None = None) -> CommandOutput:
    """Monte Carlo versus analytic coincidences on the configured grid, plus the g2 width."""
    v = cfg.validation
    base = cfg.validation_base()
    cells = run_validation(
        base,
        pair_rates=v.pair_rates_cps,
        windows=[t * 1e-12 for t in v.t_cc_ps],
        sigma_cs=[s * 1e-12 for s in v.sigma_c_ps],
        n_sigma=v.n_sigma,
        model_sigma_c_offset=v.model_sigma_c_offset_ps * 1e-12,
    )
    buf = io.StringIO()
    buf.write(_stamp(cfg))
    buf.write("pair_rate_cps,t_cc_ps,sigma_c_ps,cc_true_sim,cc_true_pred,z_true,cc_acc_sim,cc_acc_pred,z_acc,pass\n")
    for c in cells:
        buf.write(
            f"{c.pair_rate:g},{c.t_cc * 1e12:g},{c.sigma_c * 1e12:g},{c.cc_true_sim},{c.cc_true_pred:.3f},"
            f"{c.z_true:.3f},{c.cc_acc_sim},{c.cc_acc_pred:.3f},{c.z_acc:.3f},{'PASS' if c.passed else 'FAIL'}\n"
        )
    streams = simulate(base)
    g2 = g2_histogram(streams, bin_width=v.g2_bin_ps * 1e-12, span=v.g2_span_ps * 1e-12)
    n_pass = sum(c.passed for c in cells)
    buf.write(f"# g2_fwhm_ps={g2.fwhm * 1e12:.3f} expected_ps={v.jitter_fwhm_ps:g}\n")
    buf.write(f"# cells_passed={n_pass}/{len(cells)}\n")
    return CommandOutput(buf.getvalue(), EXIT_OK if n_pass == len(cells) else EXIT_FAILED)


def cmd_network(cfg: RunConfig, base_dir: Path | None = None) -> CommandOutput:
    """Fully connected plan using per-channel rates at ``source.pump_power_mw``."""
    scenario = _single_scenario(cfg, base_dir)
    result = total_key_rate(scenario, cfg.source.pump_power_mw)
    pairs = scenario.grid.pairs()
    users = cfg.network.users or max_fully_connected_users(len(pairs))
    plan = assign_channels(users, pairs, [c.secure_rate for c in result.channels])
    buf = io.StringIO()
    write_plan_csv(plan, buf, comment=_stamp(cfg)[2:].rstrip("\n"))
    buf.write(f"# users={plan.users} links={len(plan.links)} leftover_pairs={plan.leftover_pairs}\n")
    return CommandOutput(buf.getvalue(), EXIT_SATURATED if result.saturated else EXIT_OK)


def cmd_simulate(cfg: RunConfig, out, fmt: str = "csv") -> int:
    streams = simulate(cfg.sim_config())
    if fmt == "bin":
        write_timetags(out, streams, fmt="bin")
    else:
        write_timetags(out, streams, fmt="csv", header_comment=_stamp(cfg)[2:].rstrip("\n"))
    return EXIT_OK


COMMANDS = {
    "rates": cmd_rates,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "network": cmd_network,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wdmqkd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"wdmqkd {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("rates", "sweep", "validate", "network", "simulate"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, help="YAML or JSON run configuration")
        p.add_argument("--out", type=Path, help="output file (default: stdout)")
        p.add_argument("--seed", type=int, help="override the configured seed (unsigned 64-bit)")
        formats = ("csv", "bin") if name == "simulate" else ("csv",)
        p.add_argument("--format", choices=formats, default="csv")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed)
        if cfg.command is not None and cfg.command != args.command:
            raise ConfigError(f"command: config is for {cfg.command!r}, invoked as {args.command!r}")
        base_dir = args.config.parent if args.config else None
        if args.command == "simulate":
            target = args.out
            if target is None:
                target = sys.stdout.buffer if args.format == "bin" else sys.stdout
            return cmd_simulate(cfg, target, args.format)
        output = COMMANDS[args.command](cfg, base_dir)
    except (ConfigError, InsufficientPairsError, FileNotFoundError) as err:
        print(f"wdmqkd: configuration error:\n{err}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as err:
        print(f"wdmqkd: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.out is None:
        sys.stdout.write(output.text)
    else:
        args.out.write_text(output.text, encoding="utf-8")
    if output.exit_code == EXIT_SATURATED:
        print("wdmqkd: warning: detector count rate above max_count_rate in some channels", file=sys.stderr)
    return output.exit_code


if __name__ == "__main__":
    sys.exit(main())
