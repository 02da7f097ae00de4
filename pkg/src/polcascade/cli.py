"""Command-line front end: figure presets, config files and run manifests.

Every run writes its outputs plus ``manifest.json`` into ``--out``. The
manifest holds the fully resolved parameters, so

    polcascade <command> --config out/manifest.json

replays the run and reproduces the data files bit for bit.
"""

import argparse
import copy
import json
import os
import platform
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import (CoincidenceData, accumulate, analyze, calibrate_zero_delay, convergence_track,
                       deconvolve_detector, deconvolved_g2, detector_response_from_pulse,
                       synthetic_coincidences)
from .constants import FWHM_PER_SIGMA, HBAR
from .errors import (CascadeError, ConfigError, InvalidArgumentError, NonConvergenceError,
                     NumericFailureError, RankDeficiencyError)
from .filter import FilterSpec, transmission_table
from .ladder import (CoupledOscillator, DinizParams, FeshbachParams, LadderModel,
                     diniz_linewidth_table, fit_anticrossing, synthetic_anticrossing)
from .numerics import RandomStream
from .statistics import (ReservoirModel, g2_zero_analytic, joint_steady_state, scan_detuning,
                         scan_filter, thermal_occupation)
from .trajectories import (TrajectoryConfig, coincidence_histograms, ensemble_metadata, export_clicks,
                           jackknife_g2, occupation_chi2, poisson_clicks, run_ensemble, run_trajectory)

GAMMA_R = HBAR / 350.0

_FIG2 = {"ladder": {"omega_LP": 0.0, "g": 2.7, "g_prime": 0.0, "gamma": 66.6},
         "filter": {"fwhm_F": 23.0, "peak_transmission": 1.0},
         "delta_F_over_gamma": [-0.6, 0.6, 25],
         "gamma_r": GAMMA_R, "n_r": 1.0}

PRESETS = {
    "scan-filter": {
        "fig2b": {**_FIG2, "ladder": {**_FIG2["ladder"], "g": 0.0}, "noise": "off"},
        "fig2d": {**_FIG2, "noise": "both",
                  "reservoir": {"F": 0.006, "gamma_r": GAMMA_R, "gamma_D": GAMMA_R, "g_r": 10.0}},
        "figS8": {"ladder": {"omega_LP": 0.0, "g": 0.0, "g_prime": 0.0, "gamma": 65.8},
                  "filter": {"fwhm_F": 0.33 * 65.8, "peak_transmission": 1.0},
                  "delta_F_over_gamma": [-2.0, 2.0, 201], "A_over_C": 0.029,
                  "g_over_gamma": [0.0, 0.04, 0.1, 0.25, 0.5, 1.0], "noise": "off"},
        "figS14": {**_FIG2, "noise": "on",
                   "reservoir": {"F": 0.03, "gamma_r": GAMMA_R, "gamma_D": GAMMA_R, "g_r": 10.0},
                   "g_r_sweep": [10.0, 30.0, 60.0, 90.0, 120.0]},
    },
    "scan-detuning": {
        "fig3": {"E_X": 1452.08, "Omega": 1.52,
                 "feshbach": {"g_t": 3.05, "g_s": 3.05, "g_PB": 0.07, "g_PT": 0.23,
                              "E_B": 2.2, "E_T": 2.4 * 2.2, "gamma_B": 0.34, "gamma_T": 0.34},
                 "diniz": {"kappa": 64.0, "sigma": 435.0, "gamma_X": 40.0},
                 "linewidth_table": None,
                 "delta_meV": [-3.0, 2.0, 101], "fwhm_F": 23.0, "filter_offset": 0.6,
                 "n_r": 1.0, "gamma_r": GAMMA_R},
    },
    "simulate": {
        "figS11": {"mode": "occupation", "A_over_C": [0.1, 0.3, 0.5], "gamma": 66.6, "n_max": 40,
                   "duration": 4e6, "sample_interval": 200.0},
        "figS12": {"mode": "g2", "gamma": 66.6, "g_over_gamma": 0.1, "fwhm_over_gamma": 0.35,
                   "n_r": 5.0, "gamma_r": GAMMA_R, "delta_F_over_gamma": [-0.6, 0.6, 7],
                   "trajectories": 2000, "duration": 2e4, "blocks": 20, "export_clicks": False},
        "poisson": {"mode": "poisson", "rate": 0.01, "trajectories": 400, "duration": 2e4,
                    "tau_max": 50.0, "bin": 2.5, "tau_fit": 10.0, "blocks": 20},
    },
    "analyze": {
        "analyze-thermal": {"input": None, "synthetic": {"g2_zero": 1.77, "Y0": 45.0, "sigma": 57.64},
                            "sigma_det": 9.75},
        "analyze-background": {"input": None, "synthetic": {"g2_zero": 1.0, "Y0": 45.0, "sigma": 57.64},
                               "calibration": {"t0": 0.0, "sigma": 57.64}, "sigma_det": 9.75},
        "analyze-convergence": {"input": None, "convergence": {"g2_zero": 1.77, "snapshots": 16, "Y0": 40.0},
                                "sigma_det": 9.75},
        "detector": {"input": None, "detector": {"fwhm_g2": 23.54, "fwhm_pulse": 5.01},
                     "synthetic": {"g2_zero": 2.0, "Y0": 200.0, "sigma": 57.64}, "sigma_det": 9.75},
    },
    "fit-anticrossing": {
        "figS6": {"input": None, "truth": {"E_X": 1452.08, "Omega": 1.52, "L0": 20.308, "R": 21.0,
                                           "phi": 6.25, "q": 6.319, "s1": 2.09e-3, "s2": -1.3e-6},
                  "V_lp": [30, 76, 1], "V_up": [50, 76, 1], "noise_meV": 0.05, "fixed": ["phi"]},
    },
}
DEFAULT_PRESET = {"scan-filter": "fig2d", "scan-detuning": "fig3", "simulate": "figS12",
                  "analyze": "analyze-thermal", "fit-anticrossing": "figS6"}


# ---------------------------------------------------------------- helpers


def _get(params, key, path=None, kind=None):
    if key not in params:
        raise ConfigError("missing field", f"{path or ''}{key}")
    v = params[key]
    if kind is not None and not isinstance(v, kind):
        raise ConfigError(f"expected {kind}", f"{path or ''}{key}")
    return v


def _build(cls, d, path):
    try:
        return cls(**d)
    except TypeError as e:
        raise ConfigError(str(e), path) from None
    except InvalidArgumentError as e:
        raise ConfigError(str(e), path) from None


def _grid(spec, path):
    try:
        a, b, n = spec
        return np.linspace(float(a), float(b), int(n))
    except (TypeError, ValueError):
        raise ConfigError("expected [start, stop, num]", path) from None


def _arange(spec, path):
    try:
        a, b, step = spec
        return np.arange(float(a), float(b) + 0.5 * float(step), float(step))
    except (TypeError, ValueError):
        raise ConfigError("expected [start, stop, step]", path) from None


class Run:
    """Output directory, provenance and result collection for one command."""

    def __init__(self, args, command, params, seed):
        self.out = Path(args.out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.fmt = args.format
        self.command = command
        self.params = params
        self.seed = seed
        self.workers = args.workers
        self.preset = args.preset
        self.files = []
        self.results = {}
        self.warnings = []

    @property
    def comment(self):
        return json.dumps({"polcascade": __version__, "command": self.command, "seed": self.seed,
                           "params": self.params}, sort_keys=True)

    def curve(self, name, curve):
        if self.fmt == "json":
            path = self.out / f"{name}.json"
            path.write_text(json.dumps({"provenance": json.loads(self.comment), **curve.as_dict()}, indent=1))
        else:
            path = self.out / f"{name}.csv"
            curve.to_csv(path, comment=self.comment)
        self.files.append(path.name)

    def table(self, name, header, rows):
        if self.fmt == "json":
            path = self.out / f"{name}.json"
            cols = {h: [r[i] for r in rows] for i, h in enumerate(header)}
            path.write_text(json.dumps({"provenance": json.loads(self.comment), **cols}, indent=1))
        else:
            path = self.out / f"{name}.csv"
            with open(path, "w") as fh:
                fh.write(f"# {self.comment}\n")
                fh.write(",".join(header) + "\n")
                for r in rows:
                    fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)
                                      for v in r) + "\n")
        self.files.append(path.name)

    def file(self, name):
        self.files.append(name)
        return self.out / name

    def finish(self):
        manifest = {
            "command": self.command, "preset": self.preset, "seed": self.seed, "params": self.params,
            "format": self.fmt,
            "provenance": {"polcascade": __version__, "python": platform.python_version(),
                           "numpy": np.__version__, "scipy": scipy.__version__, "workers": self.workers},
            "outputs": self.files, "results": self.results, "warnings": self.warnings,
        }
        (self.out / "manifest.json").write_text(json.dumps(manifest, indent=2, default=_jsonable))
        return manifest


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    return str(o)


# ---------------------------------------------------------------- commands


def _ac(params):
    if "A_over_C" in params:
        return float(params["A_over_C"])
    return float(params.get("gamma_r", GAMMA_R)) * float(params.get("n_r", 1.0)) / float(params["ladder"]["gamma"])


def cmd_scan_filter(run):
    p = run.params
    ladder = _build(LadderModel, _get(p, "ladder", kind=dict), "ladder")
    fdict = _get(p, "filter", kind=dict)
    fwhm = float(_get(fdict, "fwhm_F", "filter."))
    peak = float(fdict.get("peak_transmission", 1.0))
    deltas = _grid(_get(p, "delta_F_over_gamma"), "delta_F_over_gamma") * ladder.gamma
    noise = p.get("noise", "off")
    if noise not in ("off", "on", "both"):
        raise ConfigError("expected off, on or both", "noise")
    try:
        dist = thermal_occupation(_ac(p))
    except InvalidArgumentError as e:
        raise ConfigError(str(e), "A_over_C") from None

    if "g_over_gamma" in p:
        mins = {}
        for r in p["g_over_gamma"]:
            lad = LadderModel(ladder.omega_LP, float(r) * ladder.gamma, ladder.g_prime, ladder.gamma, ladder.n_max)
            c = scan_filter(lad, deltas, fwhm, dist=dist, peak_transmission=peak)
            run.curve(f"curve_g{r:g}", c)
            mins[f"{r:g}"] = float(c.g2.min())
        run.results["g2_min_by_g_over_gamma"] = mins
        return

    if noise in ("off", "both"):
        c = scan_filter(ladder, deltas, fwhm, dist=dist, peak_transmission=peak)
        run.curve("curve_no_noise", c)
        run.results["no_noise"] = {"amplitude": c.amplitude, "g2_min": float(c.g2.min()),
                                   "g2_max": float(c.g2.max())}
    if noise in ("on", "both"):
        res = _build(ReservoirModel, _get(p, "reservoir", kind=dict), "reservoir")
        joint = joint_steady_state(res, ladder.gamma)
        run.results["reservoir_summary"] = joint.summary()
        sweep = p.get("g_r_sweep", [res.g_r])
        amps = {}
        for g_r in sweep:
            c = scan_filter(ladder, deltas, fwhm, joint=joint, g_r=float(g_r), peak_transmission=peak)
            name = "curve_noise" if len(sweep) == 1 else f"curve_noise_gr{float(g_r):g}"
            run.curve(name, c)
            amps[f"{float(g_r):g}"] = {"amplitude": c.amplitude,
                                        "g_r_sigma_r_over_gamma": float(g_r) * joint.summary()["nr_std"] / ladder.gamma}
        run.results["noise"] = amps


def cmd_scan_detuning(run):
    p = run.params
    E_X, Omega = float(_get(p, "E_X")), float(_get(p, "Omega"))
    f = dict(_get(p, "feshbach", kind=dict))
    try:
        fesh = FeshbachParams.from_binding(E_X, float(f.pop("E_B")), float(f.pop("E_T")), **f)
    except KeyError as e:
        raise ConfigError("missing field", f"feshbach.{e.args[0]}") from None
    except (TypeError, InvalidArgumentError) as e:
        raise ConfigError(str(e), "feshbach") from None
    deltas = _grid(_get(p, "delta_meV"), "delta_meV")
    table = p.get("linewidth_table")
    if table:
        # measured Gamma_LP (ueV) on a detuning grid (meV), interpolated
        d_t, g_t = np.asarray(table["delta_meV"], float), np.asarray(table["gamma_LP_ueV"], float)
        if deltas.min() < d_t.min() or deltas.max() > d_t.max():
            raise ConfigError("linewidth table does not cover the detuning grid", "linewidth_table")
        G = np.interp(deltas, d_t, g_t)
        source = "table"
    else:
        dz = _build(DinizParams, {**_get(p, "diniz", kind=dict), "Omega": Omega, "omega_X": E_X}, "diniz")
        G = diniz_linewidth_table(deltas, dz)
        source = "diniz"
    c = scan_detuning(deltas, E_X, Omega, fesh, G, fwhm_F=float(p.get("fwhm_F", 23.0)),
                      filter_offset=float(p.get("filter_offset", 0.6)), n_r=float(p.get("n_r", 1.0)),
                      gamma_r=float(p.get("gamma_r", GAMMA_R)))
    run.curve("detuning_scan", c)
    d_B, d_T = fesh.resonance_detunings(E_X, Omega)
    run.results.update({"linewidth_source": source,
                        "resonances": {"eps_B_half_meV": fesh.eps_B / 2, "eps_T_third_meV": fesh.eps_T / 3,
                                       "delta_B_meV": d_B, "delta_T_meV": d_T},
                        "g2_at_most_negative_delta": float(c.g2[0])})


def _sim_g2(run, cfg, n_traj, blocks, tau_max, bin_width, tau_fit, export, tag):
    recs = run_ensemble(cfg, n_traj, workers=run.workers)
    size = 2 * max(1, n_traj // (2 * blocks))
    parts = [coincidence_histograms(recs[i:i + size], tau_max, bin_width) for i in range(0, len(recs), size)]
    est = jackknife_g2(parts, cfg.effective_lifetime, tau_fit)
    total = parts[0]
    for q in parts[1:]:
        total = total + q
    name = f"histogram_{tag}.csv"
    total.to_csv(run.file(name), comment=run.comment)
    if export:
        export_clicks(recs, run.file(f"clicks_{tag}.tsv"))
    meta = ensemble_metadata(recs)
    run.warnings += meta["warnings"]
    return est, meta


def cmd_simulate(run):
    p = run.params
    mode = _get(p, "mode")
    if mode == "occupation":
        rows = []
        for i, x in enumerate(p["A_over_C"]):
            gamma = float(p.get("gamma", 66.6))
            n_r = float(x) * gamma / GAMMA_R
            cfg = _build(TrajectoryConfig, dict(ladder=LadderModel(gamma=gamma, n_max=int(p.get("n_max", 40))),
                                                n_r=n_r, duration=float(p["duration"]), seed=run.seed,
                                                sample_interval=float(p["sample_interval"])), "simulate")
            rec = run_trajectory(cfg, RandomStream(run.seed, i))
            t = occupation_chi2(rec.occupation_trace[:, 1], float(x))
            run.results[f"A_over_C={float(x):g}"] = {"chi2": t.chi2, "dof": t.dof, "p_value": t.p_value,
                                                     "steps": rec.steps, "truncations": rec.truncations}
            for k, (o, e) in enumerate(zip(t.counts, t.expected)):
                rows.append((float(x), k, o, e))
        run.table("occupation", ["A_over_C", "n", "observed", "expected"], rows)
    elif mode == "g2":
        gamma = float(p["gamma"])
        ladder = LadderModel(0.0, float(p["g_over_gamma"]) * gamma, 0.0, gamma)
        fwhm = float(p["fwhm_over_gamma"]) * gamma
        n_r = float(p["n_r"])
        res = ReservoirModel(gamma_r=float(p.get("gamma_r", GAMMA_R)))
        dist = thermal_occupation(res.gamma_r * n_r / gamma)
        rows = []
        for j, d in enumerate(_grid(p["delta_F_over_gamma"], "delta_F_over_gamma") * gamma):
            f = FilterSpec(d, fwhm)
            cfg = _build(TrajectoryConfig, dict(ladder=ladder, filter=f, n_r=n_r, reservoir=res,
                                                duration=float(p["duration"]), seed=run.seed + j), "simulate")
            tau_LP = cfg.effective_lifetime
            est, meta = _sim_g2(run, cfg, int(p["trajectories"]), int(p.get("blocks", 20)),
                                float(p.get("tau_max", 5 * tau_LP)), float(p.get("bin", tau_LP / 4)),
                                p.get("tau_fit"), bool(p.get("export_clicks", False)), f"{j}")
            ana = g2_zero_analytic(dist, transmission_table(ladder, f, n_max=dist.n_max))
            rows.append((d, est.g2_zero, est.stderr, ana))
        run.table("g2_mc_vs_analytic", ["delta_F_ueV", "g2_mc", "stderr", "g2_analytic"], rows)
        run.results["max_abs_z"] = max(abs(r[1] - r[3]) / r[2] for r in rows)
    elif mode == "poisson":
        n, T = int(p["trajectories"]), float(p["duration"])
        recs = [poisson_clicks(float(p["rate"]), T, RandomStream(run.seed, i)) for i in range(n)]
        blocks = int(p.get("blocks", 20))
        size = 2 * max(1, n // (2 * blocks))
        parts = [coincidence_histograms(recs[i:i + size], float(p["tau_max"]), float(p["bin"]))
                 for i in range(0, n, size)]
        est = jackknife_g2(parts, float(p["tau_fit"]))
        total = parts[0]
        for q in parts[1:]:
            total = total + q
        total.to_csv(run.file("histogram_poisson.csv"), comment=run.comment)
        run.results.update({"g2_zero": est.g2_zero, "stderr": est.stderr})
    else:
        raise ConfigError("expected occupation, g2 or poisson", "mode")


def cmd_analyze(run):
    p = run.params
    rng = np.random.default_rng(np.random.SeedSequence(run.seed))
    sig_det = float(p.get("sigma_det", 9.75))
    if "detector" in p:
        d = p["detector"]
        fwhm_det = detector_response_from_pulse(float(d["fwhm_g2"]), float(d["fwhm_pulse"]))
        sig_det = fwhm_det / FWHM_PER_SIGMA
        run.results["detector"] = {"fwhm_ps": fwhm_det, "sigma_ps": sig_det}
    if "convergence" in p:
        c = p["convergence"]
        snaps = accumulate(rng, float(c["g2_zero"]), int(c["snapshots"]), Y0_final=float(c["Y0"]),
                           drift_g2=float(c.get("drift_g2", 0.0)))
        cv = convergence_track(snaps)
        run.table("convergence", ["acquisition_time", "g2", "err", "Y0"],
                  list(zip(cv.acquisition_time, cv.g2, cv.err, cv.Y0)))
        run.results["convergence"] = {"converged": cv.converged, "background_ok": cv.background_ok}
        raw = snaps[-1]
    elif p.get("input"):
        try:
            raw = CoincidenceData.load(p["input"])
        except OSError as e:
            raise ConfigError(str(e), "input") from None
    else:
        s = _get(p, "synthetic", kind=dict)
        raw = synthetic_coincidences(float(s["g2_zero"]), sigma=float(s.get("sigma", 57.64)),
                                     Y0=float(s["Y0"]), rng=rng)
    raw.save(run.file("raw.csv"))
    given = "calibration" in p
    if given:
        from .analysis import Calibration
        cal = Calibration(float(p["calibration"]["t0"]), float(p["calibration"]["sigma"]), 0.0, 0.0)
    else:
        cal = calibrate_zero_delay(raw)
    rep, filt, window = analyze(raw, cal, fix_width=given)
    filt.save(run.file("filtered.csv"))
    report = rep.as_dict()
    report.update({"sigma_ps": cal.sigma, "t0_ps": cal.t0, "window_GHz": [window.cutoff, window.edge_width],
                   "convergence_flag": run.results.get("convergence", {}).get("converged")})
    if cal.sigma > sig_det:
        s_dec = deconvolve_detector(cal.sigma, sig_det)
        report.update({"sigma_det_ps": sig_det, "sigma_dec_ps": s_dec,
                       "g2_zero_deconvolved": deconvolved_g2(rep.g2_zero, cal.sigma, sig_det)})
    (run.file("report.json")).write_text(json.dumps(report, indent=2))
    run.results["report"] = report


def cmd_fit_anticrossing(run):
    p = run.params
    truth = _build(CoupledOscillator, _get(p, "truth", kind=dict), "truth")
    if p.get("input"):
        try:
            a = np.loadtxt(p["input"], delimiter=",", comments="#", ndmin=2)
        except (OSError, ValueError) as e:
            raise ConfigError(str(e), "input") from None
        V, E, br = a[:, 0], a[:, 1], a[:, 2].astype(int)
    else:
        rng = np.random.default_rng(np.random.SeedSequence(run.seed))
        V, E, br = synthetic_anticrossing(truth, _arange(p["V_lp"], "V_lp"), _arange(p["V_up"], "V_up"),
                                          noise=float(p["noise_meV"]), rng=rng)
        run.table("anticrossing_data", ["V_P", "E_meV", "branch"], list(zip(V, E, br)))
    if len(set(br.tolist())) < 2:
        run.warnings.append("single-branch input: Omega and E_X are weakly constrained (rank warning)")
    fixed = list(p.get("fixed", ["phi"]))
    try:
        osc, fit = fit_anticrossing(V, E, br, truth, sigma=float(p.get("noise_meV", 0.05)), fixed=tuple(fixed))
    except RankDeficiencyError:
        fallback = sorted(set(fixed) | set(p.get("fallback_fixed", ["phi", "q", "R"])))
        if fallback == sorted(fixed):
            raise
        run.warnings.append(f"fit with {fixed} fixed is singular (absolute cavity length unidentifiable); "
                            f"refitted with {fallback} held at their initial values")
        fixed = fallback
        osc, fit = fit_anticrossing(V, E, br, truth, sigma=float(p.get("noise_meV", 0.05)), fixed=tuple(fixed))
    run.results["fixed"] = fixed
    free = fit.std_errors > 0
    se = fit.std_errors[free]
    corr = fit.covariance[np.ix_(free, free)] / np.outer(se, se)
    if np.any(np.abs(corr - np.eye(free.sum())) > 0.9999):
        run.warnings.append("near-degenerate parameters (|correlation| > 0.9999)")
    names = CoupledOscillator._FIELDS
    loose = [k for k, v, e in zip(names, fit.params, fit.std_errors) if e > abs(v)]
    if loose:
        run.warnings.append("poorly constrained over this voltage range (stderr > |value|): " + ", ".join(loose))
    run.results["parameters"] = {k: {"value": float(v), "stderr": float(e), "fixed": k in fixed}
                                 for k, v, e in zip(names, fit.params, fit.std_errors)}
    run.results["rabi_splitting_meV"] = {"value": osc.rabi_splitting, "stderr": 2 * float(fit.std_errors[1])}
    run.results["chi2_red"] = fit.chi2_red
    run.results["penetration_depth_um_at_0.855"] = osc.penetration_depth(0.855)


COMMANDS = {"scan-filter": cmd_scan_filter, "scan-detuning": cmd_scan_detuning, "simulate": cmd_simulate,
            "analyze": cmd_analyze, "fit-anticrossing": cmd_fit_anticrossing}


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def resolve_params(command, preset=None, config=None):
    """Preset (default for the command) overlaid with a config file.

    A config may be a plain parameter object, a {"params": ...} object
    (a manifest) or have per-command sections keyed by command name.
    Returns (params, preset_name, seed_from_config).
    """
    cfg = {}
    if config:
        try:
            cfg = json.loads(Path(config).read_text())
        except OSError as e:
            raise ConfigError(str(e), "--config") from None
        except json.JSONDecodeError as e:
            raise ConfigError(f"invalid JSON: {e}", "--config") from None
        if not isinstance(cfg, dict):
            raise ConfigError("top level must be an object", "--config")
    seed = cfg.get("seed")
    if "command" in cfg and cfg["command"] != command:
        raise ConfigError(f"manifest is for {cfg['command']!r}", "command")
    preset = preset or cfg.get("preset")
    if command in cfg and isinstance(cfg[command], dict):
        cfg = cfg[command]
    body = cfg.get("params", {k: v for k, v in cfg.items() if k not in ("seed", "preset", "command")})
    preset = preset or DEFAULT_PRESET[command]
    if preset not in PRESETS[command]:
        raise ConfigError(f"unknown preset {preset!r} (have {sorted(PRESETS[command])})", "--preset")
    return _merge(PRESETS[command][preset], body), preset, seed


def build_parser():
    ap = argparse.ArgumentParser(prog="polcascade", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config or a manifest.json to replay")
        sp.add_argument("--preset", help="named parameter set: " + ", ".join(PRESETS[name]))
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default="out")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        params, preset, cfg_seed = resolve_params(args.command, args.preset, args.config)
        args.preset = preset
        seed = args.seed if args.seed is not None else (cfg_seed if cfg_seed is not None else 12345)
        if not 0 <= seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer", "--seed")
        run = Run(args, args.command, params, seed)
        COMMANDS[args.command](run)
        manifest = run.finish()
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except NonConvergenceError as e:
        print(f"non-convergence: {e}", file=sys.stderr)
        return 4
    except NumericFailureError as e:
        print(f"numeric failure: {e}", file=sys.stderr)
        return 3
    except (InvalidArgumentError, KeyError, TypeError, ValueError) as e:
        print(f"config error: {e!r}", file=sys.stderr)
        return 2
    except CascadeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    for w in manifest["warnings"]:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps({"out": str(run.out), "outputs": manifest["outputs"], "results": manifest["results"]},
                     indent=1, default=_jsonable))
    return 0


if __name__ == "__main__":
    sys.exit(main())
