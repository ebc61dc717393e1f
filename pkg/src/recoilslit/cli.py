"""Command-line front end.

    recoilslit visibility-scan --scenario s.json --out runs/a
    recoilslit dynamics --samples 20000
    recoilslit thermometry --input spectrum.csv --shots 200
    recoilslit fringe --bootstrap 500
    recoilslit lock-sim

Every command validates the whole scenario before computing, writes the
resolved scenario next to its outputs and records all files with their
SHA-256 in ``manifest.json``. Exit codes: 0 success, 2 invalid input,
3 numerical or fit failure.
"""

import argparse
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import __version__, io
from .constants import KHZ
from .dynamics import initial_state, time_binned_visibility, wigner_histogram
from .errors import DomainError, FitError
from .fringes import fit_fringe, synthesize_fringe
from .phaselock import lock_residual_simulation
from .physics import depth_scan, eta, eta_eff, ground_state_sigmas, visibility
from .scenario import format_errors, load_scenario
from .thermometry import fit_sidebands, synthesize_spectrum

log = logging.getLogger("recoilslit")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_NUMERICAL = 3


def _utc_now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


class Run:
    """Collects outputs of one command and writes them plus the manifest."""

    def __init__(self, command, scenario, out_dir):
        self.command = command
        self.scenario = scenario
        self.out = Path(out_dir)
        self.started = _utc_now()
        self.files = []

    def path(self, name):
        return self.out / name

    def add(self, path):
        self.files.append(Path(path))
        return path

    def finish(self, summary=None):
        self.add(io.write_json(self.path("scenario.resolved.json"), self.scenario.resolved()))
        manifest_path = self.path("manifest.json")
        manifest = {"tool": "recoilslit", "runs": {}}
        if manifest_path.exists():
            try:
                manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
            except json.JSONDecodeError:
                log.warning("overwriting unreadable manifest %s", manifest_path)
        manifest["tool"] = "recoilslit"
        manifest["tool_version"] = __version__
        manifest.setdefault("runs", {})[self.command] = {
            "scenario_sha256": self.scenario.digest(),
            "started_utc": self.started,
            "finished_utc": _utc_now(),
            "outputs": [
                {"path": f.relative_to(self.out).as_posix(), "sha256": io.sha256_file(f), "bytes": f.stat().st_size}
                for f in sorted(set(self.files))
            ],
            "summary": summary or {},
        }
        io.write_json(manifest_path, manifest)


def cmd_visibility_scan(scenario, args):
    constants = scenario.physical_constants()
    trap = scenario.trap.build(scenario.trap.anchor_depth_mk, constants)
    table = depth_scan(scenario.scan.depths_mk, scenario.scan.nbar_per_depth(), trap,
                       scenario.scan.axial_projection, constants)
    rows = zip(
        table["depth_mk"],
        table["omega_axial"] / (2 * np.pi * KHZ),
        table["delta_p"] / constants.hbar_k,
        table["eta"],
        table["nbar"],
        table["v_ideal"],
        table["v_thermal"],
    )
    run = Run("visibility-scan", scenario, args.out)
    run.add(io.write_csv(run.path("visibility_scan.csv"),
                         ["depth_mk", "omega_ax_khz", "dp_hbark", "eta", "nbar", "v_ideal", "v_thermal"], rows))
    run.finish({"n_depths": len(table["depth_mk"])})
    return EXIT_OK


def cmd_dynamics(scenario, args):
    constants = scenario.physical_constants()
    dyn = scenario.dynamics
    trap = scenario.trap.build(dyn.depth_mk, constants)
    scat = scenario.scattering.build(constants)
    state = initial_state(trap, dyn.nbar, constants)
    x_range = tuple(v * 1e-6 for v in dyn.wigner_x_range_um)
    p_range = tuple(v * constants.hbar_k for v in dyn.wigner_p_range_hbark)
    grids = {}

    def snapshot(b, ensemble):
        grids[b] = wigner_histogram(ensemble, x_range, p_range, dyn.wigner_bins)

    series = time_binned_visibility(state, trap, scat, dyn.total_time, dyn.bin_width, dyn.n_samples,
                                    scenario.seed, constants, dyn.workers, snapshot)
    static = visibility(eta_eff(eta(state.delta_p0, scat.axial_projection, constants), dyn.nbar))

    run = Run("dynamics", scenario, args.out)
    run.add(io.write_series(run.path("visibility_series.csv"), series))
    for b, (density, xe, pe) in sorted(grids.items()):
        run.add(io.write_wigner(run.path(f"wigner/bin_{b:02d}.csv"), density, xe, pe, constants.hbar_k))
    run.finish({
        "static_visibility": static,
        "first_bin_visibility": float(series.visibility[0]),
        "last_bin_visibility": float(series.visibility[-1]),
        "axial_freq_khz": trap.axial_freq / (2 * np.pi * KHZ),
    })
    return EXIT_OK


def cmd_thermometry(scenario, args):
    th = scenario.thermometry
    constants = scenario.physical_constants()
    run = Run("thermometry", scenario, args.out)
    if args.input:
        spectrum = io.read_spectrum(args.input, shots=args.shots)
    else:
        if th.trap_freq_khz is None:
            omega = scenario.trap.build(scenario.trap.anchor_depth_mk, constants).axial_freq
        else:
            omega = 2 * np.pi * th.trap_freq_khz * KHZ
        spectrum = synthesize_spectrum(
            th.nbar,
            omega,
            2 * np.pi * th.peak_fwhm_khz * KHZ,
            th.carrier_amp,
            None if th.noiseless else scenario.seed,
            sideband_coupling=th.sideband_coupling,
            carrier_width=None if th.carrier_fwhm_khz is None else 2 * np.pi * th.carrier_fwhm_khz * KHZ,
            shots=th.shots,
            n_points=th.n_points,
            span=th.span,
        )
    fit = fit_sidebands(spectrum)
    report = fit.report()
    if not args.input:
        report["nbar_true"] = th.nbar
        run.add(io.write_spectrum(run.path("spectrum.csv"), spectrum))
    run.add(io.write_json(run.path("thermometry_fit.json"), report))
    run.finish({"nbar": fit.nbar, "p0": fit.p0})
    return EXIT_OK


def fringe_visibility(scenario):
    """Visibility used for synthetic fringes: explicit, or closed form at depth and nbar."""
    fr = scenario.fringe
    if fr.visibility is not None:
        return fr.visibility
    constants = scenario.physical_constants()
    trap = scenario.trap.build(fr.depth_mk, constants)
    _, dp = ground_state_sigmas(trap.axial_freq, constants.mass_rb87, 0.0, constants.hbar)
    return visibility(eta_eff(eta(dp, scenario.scan.axial_projection, constants), fr.nbar))


def cmd_fringe(scenario, args):
    fr = scenario.fringe
    run = Run("fringe", scenario, args.out)
    bootstrap = fr.bootstrap if args.bootstrap is None else args.bootstrap
    if args.input:
        dataset = io.read_fringe(args.input)
        truth = None
    else:
        truth = fringe_visibility(scenario)
        dataset = synthesize_fringe(truth, fr.phase_offset_rad, fr.n_points, fr.mean_counts,
                                    fr.phase_noise_mrad * 1e-3, None if fr.noiseless else scenario.seed)
    fit = fit_fringe(dataset, bootstrap=bootstrap, seed=scenario.seed)
    report = fit.report()
    if truth is not None:
        report["visibility_true"] = truth
        run.add(io.write_fringe(run.path("fringe_data.csv"), dataset))
    run.add(io.write_json(run.path("fringe_fit.json"), report))
    run.finish({"visibility": fit.visibility, "visibility_err": fit.visibility_err})
    return EXIT_OK


def cmd_lock_sim(scenario, args):
    model = scenario.lock.build()
    result = lock_residual_simulation(model, scenario.lock.duration_s, scenario.seed)
    summary = {
        "residual_rms_rad": result.residual_rms,
        "open_loop_rms_rad": result.open_loop_rms,
        "locked": result.locked,
        "saturated": result.saturated,
        "beat_frequency_hz": model.beat_frequency,
    }
    run = Run("lock-sim", scenario, args.out)
    run.add(io.write_trace(run.path("phase_trace.csv"), result.times, result.phase))
    run.add(io.write_json(run.path("lock_summary.json"), summary))
    run.finish(summary)
    return EXIT_OK


COMMANDS = {
    "visibility-scan": cmd_visibility_scan,
    "dynamics": cmd_dynamics,
    "thermometry": cmd_thermometry,
    "fringe": cmd_fringe,
    "lock-sim": cmd_lock_sim,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="recoilslit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", type=Path, help="scenario JSON (defaults: reference settings)")
        p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
        p.add_argument("--seed", type=int, help="override scenario seed")
        p.add_argument("--samples", type=int, help="override dynamics.n_samples")
        p.add_argument("--workers", type=int, help="override dynamics.workers")
        if name in ("thermometry", "fringe"):
            p.add_argument("--input", type=Path, help="measured data CSV instead of synthetic data")
        if name == "thermometry":
            p.add_argument("--shots", type=int, help="shots per point of --input (enables binomial reweighting)")
        if name == "fringe":
            p.add_argument("--bootstrap", type=int, help="number of bootstrap replicates")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.samples is not None:
        overrides["dynamics.n_samples"] = args.samples
    if args.workers is not None:
        overrides["dynamics.workers"] = args.workers
    try:
        text = args.scenario.read_text(encoding="utf-8") if args.scenario else None
        scenario = load_scenario(text, overrides)
        if getattr(args, "input", None) is not None and not args.input.is_file():
            raise DomainError(f"input file not found: {args.input}")
    except ValidationError as exc:
        for line in format_errors(exc):
            print(f"invalid scenario: {line}", file=sys.stderr)
        return EXIT_INVALID
    except (OSError, json.JSONDecodeError, DomainError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        return COMMANDS[args.command](scenario, args)
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        for key, value in getattr(exc, "diagnostics", {}).items():
            print(f"  {key}: {value}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DomainError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    raise SystemExit(main())
