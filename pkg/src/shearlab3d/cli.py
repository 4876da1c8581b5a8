"""Command-line entry point: shearlab3d <command> --config FILE [--out DIR] [--threads N] [--seed S]."""
from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from . import approximation as ap
from . import plotting
from .errors import OutputError, PreconditionError, ShearletError
from .frames import OverlapTables, TruncationPolicy, frame_bound_interval
from .generators import FeasibilityProfile, filter_generator, verify_feasibility
from .geometry import LatticeConstants, as_alpha
from .io import Writer, config_hash, ensure_dir, env_threads, load_config
from .phantoms import (CartoonSpec, ball_phantom, hypercube_fixture, make_radius_field,
                       random_smooth_part, rasterize_cartoon)
from .transform import ShearletSystem

COMMANDS = ("certify", "approximate", "phantom", "hypercube", "decay", "count")


# ---------------------------------------------------------------------------
# builders


def build_generator(cfg):
    s = cfg["system"]
    return filter_generator(int(s["K"]), int(s["Lfilt"]), int(s["J_phi"]))


def build_lattice(cfg) -> LatticeConstants:
    s = cfg["system"]
    try:
        return LatticeConstants(float(s["c1"]), float(s["c2"]))
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc


def build_alpha(cfg):
    a = cfg["system"]["alpha"]
    try:
        return as_alpha(a if isinstance(a, float) else str(a))
    except (ValueError, ZeroDivisionError) as exc:
        raise PreconditionError(str(exc)) from exc


def build_profile(cfg) -> FeasibilityProfile:
    p = cfg["profile"]
    try:
        return FeasibilityProfile(delta=p["delta"], gamma=p["gamma"], q=p["q"], q_prime=p["q_prime"],
                                  r=p["r"], s=p["s"])
    except ValueError as exc:
        raise PreconditionError(str(exc)) from exc


def build_policy(cfg) -> TruncationPolicy:
    p = cfg["policy"]
    return TruncationPolicy(j_max_sum=int(p["j_max_sum"]), lattice_radius=int(p["lattice_radius"]),
                            n_xi1=int(p["n_xi1"]), n_cross=int(p["n_cross"]),
                            tail_tol=float(p["tail_tol"]), max_radius=int(p["max_radius"]))


def build_system(cfg, threads: int = 1, n: int | None = None) -> ShearletSystem:
    s = cfg["system"]
    j_max = None if s["j_max"] in ("auto", None) else int(s["j_max"])
    return ShearletSystem(build_generator(cfg), build_alpha(cfg), build_lattice(cfg),
                          n=int(n or s["grid_n"]), j_min=int(s["j_min"]), j_max=j_max,
                          thr=float(s["thr"]), threads=threads)


def build_phantom(cfg, n: int | None = None, validate: bool = False, threads: int = 1):
    p = cfg["phantom"]
    n = int(n or cfg["system"]["grid_n"])
    seed = int(cfg["seed"])
    kind = p["kind"]
    if kind == "ball":
        vol = ball_phantom(tuple(p["center"]), float(p["radius"]), n)
        return vol, {"kind": "ball", "radius": p["radius"], "center": p["center"]}
    field = make_radius_field(kind, p["alpha"], p["nu"], int(p["L_patches"]), seed)
    terms = int(p["smooth_terms"])
    f1 = random_smooth_part(p["mu"], p["beta"], seed + 1, terms, const=0.5) if terms else None
    spec = CartoonSpec(float(p["alpha"]), float(p["beta"]), float(p["nu"]), float(p["mu"]), field,
                       center=tuple(p["center"]), seed=seed)
    if f1 is not None:
        spec.f1 = f1
    report = spec.validate() if validate else None
    vol = rasterize_cartoon(spec, n, threads=threads)
    info = spec.describe() | ({"validation": report} if report else {})
    return vol, info


# ---------------------------------------------------------------------------
# commands


def cmd_certify(cfg, w: Writer, threads: int = 1, log=print) -> dict:
    gen = build_generator(cfg)
    prof = build_profile(cfg)
    alpha = build_alpha(cfg)
    c = build_lattice(cfg)
    feas = verify_feasibility(gen, prof)
    if not feas.passes:
        raise PreconditionError(f"generator fails the feasibility profile (holdout ratio "
                                f"{feas.holdout_ratio:.4g} > C_fit {feas.c_fit:.4g})")
    policy = build_policy(cfg)
    tables = OverlapTables(gen, float(alpha), policy, prof)
    cert = frame_bound_interval(gen, alpha, c, policy, prof, c_fit=feas.c_fit, tables=tables)
    log(f"certificate: lower={cert.lower:.6g} upper={cert.upper:.6g} certified={cert.certified}")
    w.json("certificate.json", {"certificate": cert.to_dict(), "feasibility": feas.to_dict()})
    phi = tables.phi((0.0, 0.0, 0.0))
    mid = len(tables.u) // 2
    lo, hi = phi.min(axis=(1, 2)), phi.max(axis=(1, 2))
    on_axis = phi[:, mid, mid]
    w.csv("phi_profile.csv", ["xi1", "phi_min", "phi_max", "phi_center"],
          zip(tables.xi1, lo, hi, on_axis))
    w.svg("phi_profile.svg", plotting.profile_figure(tables.xi1, lo, hi, on_axis))
    body = [f"alpha = {alpha}", f"c = ({c.c1}, {c.c2})", f"L_inf = {cert.L_inf:.6g}",
            f"L_sup = {cert.L_sup:.6g}", f"R(c) = {cert.R_c:.6g}",
            f"analytic L_sup bound = {cert.analytic_Lsup:.6g}",
            f"analytic R(c) bound = {cert.analytic_Rc:.6g}", f"C_fit = {feas.c_fit:.6g}",
            f"frame bounds in [{cert.lower:.6g}, {cert.upper:.6g}]",
            f"status = {'certified' if cert.certified else cert.flag}"]
    w.text("summary.txt", "\n".join(body) + "\n")
    return {"certificate": cert, "feasibility": feas}


def _Ns(cfg):
    e = cfg["experiment"]
    return ap.default_Ns(float(e["N_lo"]), float(e["N_hi"]), int(e["N_count"]))


def cmd_approximate(cfg, w: Writer, threads: int = 1, log=print) -> dict:
    cache = w.dir / ".cache"
    key = config_hash({k: cfg[k] for k in ("system", "profile", "policy")})
    cached = cache / f"certificate-{key}.json"
    if cached.exists():
        cert = json.loads(cached.read_text())["certificate"]
    else:
        sub = Writer(cache / f"certify-{key}", w.chash, w.version)
        cert = cmd_certify(cfg, sub, threads, log)["certificate"].to_dict()
        ensure_dir(cache)
        cached.write_text(json.dumps({"certificate": cert}, sort_keys=True, default=str))
    if not cert["certified"]:
        raise PreconditionError("system has no lower-bound certificate; refusing to approximate")
    alpha = build_alpha(cfg)
    sysm = build_system(cfg, threads)
    vol, info = build_phantom(cfg, sysm.n, threads=threads)
    pid = info.get("kind", "phantom")
    Ns = _Ns(cfg)
    log(f"system: {sysm.total} coefficients over {len(sysm.bands)} bands")
    curves = [ap.error_curve(vol, sysm, Ns, pid, tol=float(cfg["experiment"]["cg_tol"]))]
    if "wavelet" in cfg["experiment"]["baselines"]:
        curves.append(ap.wavelet_baseline(vol, Ns, K=int(cfg["experiment"]["wavelet_K"]), phantom_id=pid))
    if "fourier" in cfg["experiment"]["baselines"]:
        curves.append(ap.fourier_baseline(vol, Ns, phantom_id=pid))
    fits = {cv.method: ap.fit_rate(cv) for cv in curves}
    a = float(alpha)
    t = ap.tau(alpha)
    targets = {"shearlet": -a / 2 + float(t), "wavelet": -0.5, "fourier": -1.0 / 3.0}
    for cv in curves:
        w.csv(f"curve_{cv.method}.csv", ["N", "err2"], cv.points)
    w.json("rates.json", {
        "phantom": info, "system": sysm.summary(),
        "fits": {m: f.to_dict() for m, f in fits.items()},
        "targets": targets, "tau": float(t),
        "monotone_violations": {cv.method: cv.monotone_violations for cv in curves}})
    w.svg("curves.svg", plotting.error_curves_figure(curves, fits, title=f"{pid}, n={sysm.n}"))
    for m, f in fits.items():
        log(f"{m}: slope {f.slope:.3f} (target {targets[m]:.3f})")
    return {"curves": curves, "fits": fits, "targets": targets}


def cmd_phantom(cfg, w: Writer, threads: int = 1, log=print, validate: bool = False) -> dict:
    vol, info = build_phantom(cfg, validate=validate, threads=threads)
    w.volume("phantom", vol, seed=int(cfg["seed"]), provenance=info)
    w.svg("phantom_slice.svg", plotting.slice_figure(vol))
    log(f"phantom {info.get('kind')}: mean {vol.data.mean():.6g}")
    return {"volume": vol, "info": info}


def cmd_hypercube(cfg, w: Writer, threads: int = 1, log=print) -> dict:
    e = cfg["experiment"]
    mode = e["hypercube_mode"]
    expo_param = float(cfg["phantom"]["beta"] if mode == "holder_bump" else cfg["phantom"]["alpha"])
    ms, deltas, rows = [], [], []
    for m in e["hypercube_m"]:
        fx = hypercube_fixture(int(m), mode, expo_param, float(e["hypercube_amp"]), int(e["hypercube_n"]))
        ms.append(int(m))
        deltas.append(fx.delta)
        rows.append((int(m), len(fx.vertex_atoms), fx.delta, fx.spread, fx.gram_offdiag_max()))
    y = np.log(np.array(deltas) ** 2 if mode == "binary_surface" else np.array(deltas))
    slope, icpt = np.polyfit(np.log(ms), y, 1)
    target = -(expo_param + 2) if mode == "binary_surface" else -(expo_param + 1.5)
    w.csv("hypercube.csv", ["m", "atoms", "delta", "spread", "max_offdiag"], rows)
    w.json("hypercube.json", {"mode": mode, "exponent": float(slope), "target": target,
                              "quantity": "delta^2" if mode == "binary_surface" else "delta",
                              "rows": rows})
    yl = r"$\delta^2$" if mode == "binary_surface" else r"$\delta$"
    w.svg("hypercube.svg", plotting.loglog_fit_figure(ms, np.exp(y), float(slope), float(icpt), "m", yl))
    log(f"hypercube {mode}: exponent {slope:.3f} (target {target:.3f})")
    return {"exponent": float(slope), "target": target, "rows": rows}


def cmd_decay(cfg, w: Writer, threads: int = 1, log=print) -> dict:
    e = cfg["experiment"]
    alpha = build_alpha(cfg)
    gen = build_generator(cfg)
    n = int(e["decay_n"])
    j = int(e["decay_j"])
    s = tuple(float(v) for v in e["decay_slope"])
    tab = ap.shear_decay_experiment(s, j, n=n, alpha=alpha, gen=gen)
    sc = ap.scale_decay_experiment(tuple(int(v) for v in e["decay_scales"]), n=n, alpha=alpha, s=s, gen=gen)
    w.csv("shear_decay.csv", ["k1", "k2", "offset", "max_coef"], tab.rows)
    w.json("decay.json", {"j": j, "slope": list(s), "shear_exponent": tab.exponent,
                          "shear_target": -3.0, "fit_window": list(tab.fit_window),
                          "argmax_k": list(tab.argmax_k()), "scale": sc})
    pts = [(r[2], r[3]) for r in tab.rows if tab.fit_window[0] <= r[2] <= tab.fit_window[1] and r[3] > 0]
    if len(pts) >= 2:
        x, y = np.array(pts).T
        sl, ic = np.polyfit(np.log(x), np.log(y), 1)
        w.svg("shear_decay.svg", plotting.loglog_fit_figure(x, y, float(sl), float(ic),
                                                            "shear offset", "max |coefficient|"))
    log(f"shear decay exponent {tab.exponent:.3f}; scale exponent {sc['exponent']:.3f} "
        f"(target {sc['target']:.3f})")
    return {"table": tab, "scale": sc}


def cmd_count(cfg, w: Writer, threads: int = 1, log=print) -> dict:
    e = cfg["experiment"]
    sysm = build_system(cfg, threads)
    vol, info = build_phantom(cfg, sysm.n, threads=threads)
    c = sysm.analyze(vol)
    eps = ap.default_eps(c, float(e["count_decades"]), int(e["count_per_decade"]), float(e["count_skip"]))
    res = ap.significant_count(c, eps, build_alpha(cfg))
    w.csv("count.csv", ["eps", "count"], res.rows())
    w.json("count.json", {"exponent": res.exponent, "target": res.target, "phantom": info,
                          "system": sysm.summary(), "rows": res.rows()})
    ok = res.counts > 0
    if ok.sum() >= 2:
        sl, ic = np.polyfit(np.log(res.eps[ok]), np.log(res.counts[ok]), 1)
        w.svg("count.svg", plotting.loglog_fit_figure(res.eps[ok], res.counts[ok], float(sl), float(ic),
                                                      r"$\varepsilon$", r"$|\Lambda(\varepsilon)|$"))
    log(f"count exponent {res.exponent:.3f} (target {res.target:.3f})")
    return {"count": res}


HANDLERS = {"certify": cmd_certify, "approximate": cmd_approximate, "phantom": cmd_phantom,
            "hypercube": cmd_hypercube, "decay": cmd_decay, "count": cmd_count}


def run(command: str, config_path=None, out=None, threads: int = 1, seed=None, validate: bool = False,
        log=print) -> dict:
    """Programmatic entry point shared by main() and the tests."""
    if command not in HANDLERS:
        raise PreconditionError(f"unknown command {command!r}")
    overrides = {"seed": int(seed)} if seed is not None else None
    cfg = load_config(config_path, overrides)
    chash = config_hash(cfg)
    w = Writer(out or f"results-{command}", chash, __version__)
    w.config(cfg)
    kw = {"validate": validate} if command == "phantom" else {}
    res = HANDLERS[command](cfg, w, threads, log, **kw)
    w.json("manifest.json", {"command": command, "files": sorted(set(w.written) - {"manifest.json"})})
    return res


def main(argv=None) -> int:
    ap_ = argparse.ArgumentParser(prog="shearlab3d", description="3D shearlet frame experiments")
    ap_.add_argument("command", choices=COMMANDS)
    ap_.add_argument("--config", required=True, help="TOML config file")
    ap_.add_argument("--out", default=None, help="output directory (created if missing)")
    ap_.add_argument("--threads", type=int, default=None, help="default: $SHEARLAB3D_THREADS or 1")
    ap_.add_argument("--seed", type=int, default=None)
    ap_.add_argument("--validate", action="store_true", help="phantom: reject specs over budget")
    args = ap_.parse_args(argv)
    t0 = time.perf_counter()

    def log(msg):
        print(msg, file=sys.stderr)

    try:
        threads = env_threads() if args.threads is None else max(1, args.threads)
        run(args.command, args.config, args.out, threads, args.seed, args.validate, log)
    except ShearletError as exc:
        log(f"error: {exc}")
        return exc.exit_code
    except OSError as exc:
        log(f"error: {exc}")
        return OutputError.exit_code
    log(f"done in {time.perf_counter() - t0:.1f} s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
