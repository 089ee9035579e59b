"""Batch command-line entry point.

One JSON config file drives one command per process; the config's top-level
"command" field must match the subcommand, so a run is reproducible from the
single file.  Primary outputs are JSON with stable key ordering plus
plot-ready CSV; wall-clock metadata goes to a sidecar so primary outputs are
byte-identical across reruns with the same seed.

Exit codes: 0 success, 2 config validation failure, 3 numerical failure.
Verdicts (non-critical, indefinite, inconclusive) are data, not errors.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import energy, geometry as geo, hessian, laminar, state as st
from .errors import ConfigError, StratwaveError
from .laminar import _energy_of_streamvalue
from .profiles import (LayerProfiles, ScalarProfile, build_bernoulli_map,
                       validate_profiles)

COMMANDS = ("laminar", "audit-grad", "audit-hess", "stability",
            "manufacture", "residual")


# -- config helpers -----------------------------------------------------------

def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing required config field: {key!r}")
    return cfg[key]


def _positive(cfg: dict, key: str, default=None):
    val = cfg.get(key, default)
    if val is None:
        raise ConfigError(f"missing required config field: {key!r}")
    if not isinstance(val, (int, float)) or val <= 0:
        raise ConfigError(f"config field {key!r} must be > 0, got {val!r}")
    return val


def _profiles_from_config(cfg: dict):
    block = _require(cfg, "profiles")
    out = []
    for i, key in ((1, "layer1"), (2, "layer2")):
        layer = _require(block, key)
        try:
            rho = ScalarProfile.from_config(_require(layer, "rho"))
            beta = ScalarProfile.from_config(_require(layer, "beta"))
        except (ValueError, KeyError, TypeError) as exc:
            raise ConfigError(f"bad profile config for {key}: {exc}") from exc
        out.append(LayerProfiles(i, rho, beta,
                                 s_range=tuple(layer.get("s_range",
                                                         (-np.inf, np.inf))),
                                 q_range=tuple(layer.get("q_range",
                                                         (-np.inf, np.inf)))))
    return out[0], out[1]


def _grid_config(cfg: dict):
    grid = cfg.get("grid", {})
    nx = int(grid.get("nx", 64))
    ns1 = int(grid.get("ns1", 33))
    ns2 = int(grid.get("ns2", 33))
    x_deriv = grid.get("x_deriv", "spectral")
    return nx, ns1, ns2, x_deriv


def _solve_laminar_from_config(cfg: dict) -> laminar.LaminarFlow:
    profiles1, profiles2 = _profiles_from_config(cfg)
    g = float(_require(cfg, "g"))
    d = float(_require(cfg, "d"))
    h_tilde = float(_require(cfg, "h_tilde"))
    h = float(_require(cfg, "h"))
    p1 = float(_require(cfg, "p1"))
    p2 = float(_require(cfg, "p2"))
    ode_tol = _positive(cfg, "ode_tol", 1e-10)
    degree = int(cfg.get("degree", 32))
    return laminar.solve_laminar(profiles1, profiles2, g, d, h_tilde, h,
                                 p1, p2, ode_tol=ode_tol, degree=degree)


def _state_from_config(cfg: dict, out_dir: Path):
    """Build (state, profiles pair) either from a saved state or by laminar
    solve + lift."""
    profiles1, profiles2 = _profiles_from_config(cfg)
    if "state_file" in cfg:
        path = Path(cfg["state_file"])
        if not path.exists():
            raise ConfigError(f"state_file not found: {path}")
        state = st.state_from_json(path.read_text())
        return state, (profiles1, profiles2)
    flow = _solve_laminar_from_config(cfg)
    nx, ns1, ns2, x_deriv = _grid_config(cfg)
    domain = laminar.flat_domain(flow)
    grids = geo.build_grids(domain, nx, ns1, ns2, x_deriv)
    state = laminar.lift_to_state(flow, grids,
                                  c=float(cfg.get("c", 0.0)),
                                  P_atm=float(cfg.get("P_atm", 0.0)))
    return state, (profiles1, profiles2)


def _maps_from_config(cfg: dict, state: st.FlowState, profiles):
    profiles1, profiles2 = profiles
    g = state.params.g
    d = state.params.d
    # working window in the streamline coordinate; at a solution the relevant
    # values are -Psi, so pad that range unless the config pins it
    vals = np.concatenate([(-state.psi1).ravel(), (-state.psi2).ravel(),
                           [0.0, state.p1, state.p2]])
    pad = 0.5 * (np.max(vals) - np.min(vals)) + 0.5
    default_win = (float(np.min(vals) - pad), float(np.max(vals) + pad))

    def window(key, prof):
        win = cfg.get(key)
        if win is None:
            lo, hi = prof.default_p_window()
            win = (max(lo, default_win[0]), min(hi, default_win[1]))
        return (float(win[0]), float(win[1]))

    y_top = float(np.max(state.grid2.y))
    y_range = tuple(cfg.get("y_range", (-d - 0.1, y_top + 0.1)))
    return build_bernoulli_map(profiles1, profiles2, g, state.p2,
                               y_range=y_range,
                               p_window1=window("p_window1", profiles1),
                               p_window2=window("p_window2", profiles2))


def _gravity_refs_from_config(cfg: dict, profiles, state: st.FlowState):
    choice = cfg.get("gravity_refs", "default")
    if choice == "default":
        return energy.default_gravity_refs(profiles[0], profiles[1],
                                           state.p1, state.p2)
    if (isinstance(choice, (list, tuple)) and len(choice) == 2):
        return (float(choice[0]), float(choice[1]))
    raise ConfigError("gravity_refs must be \"default\" or a pair of numbers")


# -- output helpers -----------------------------------------------------------

def _plain(obj):
    """Recursively convert numpy scalars/arrays for JSON emission."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def _atomic_write(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_json(path: Path, doc: dict):
    _atomic_write(path, json.dumps(_plain(doc), sort_keys=True, indent=2)
                  + "\n")


def write_csv(path: Path, header, rows):
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([("%.17g" % v) if isinstance(v, float) else v
                             for v in row])
    os.replace(tmp, path)


def _write_sidecar(out_dir: Path, command: str, config_path: str, seed):
    doc = {"command": command, "config": str(config_path), "seed": seed,
           "timestamp": datetime.datetime.now(
               datetime.timezone.utc).isoformat()}
    write_json(out_dir / "run_meta.json", doc)


# -- commands -----------------------------------------------------------------

def cmd_laminar(cfg: dict, out_dir: Path, seed) -> int:
    flow = _solve_laminar_from_config(cfg)
    doc = flow.to_dict()
    doc["command"] = "laminar"
    write_json(out_dir / "laminar.json", doc)

    # plot-ready y-profile across both layers: anchor the pressure at the
    # surface, then carry it through the interface by continuity
    g, d = flow.g, flow.d
    p_atm = float(cfg.get("P_atm", 0.0))
    n_samples = int(cfg.get("n_profile_samples", 101))

    def layer_profile(sol, prof, lo, hi, anchor_q, anchor_value):
        ys = np.linspace(lo, hi, n_samples)
        psi = np.asarray(sol(ys))
        dpsi = np.asarray(sol.deriv(ys))
        rho = np.asarray(prof.rho(-psi))
        E = _energy_of_streamvalue(prof, g, d, psi, anchor_q, anchor_value)
        P = E - dpsi ** 2 / 2.0 - rho * g * (ys + d)
        return ys, psi, dpsi / np.sqrt(rho), P

    rho2_surf = float(flow.profiles2.rho(flow.p2))
    ke2_surf = flow.psi2_of_y.deriv(flow.h) ** 2 / 2.0
    e2_anchor = p_atm + ke2_surf + rho2_surf * g * (flow.h + d)
    y2, psi2, um2, P2 = layer_profile(flow.psi2_of_y, flow.profiles2,
                                      flow.h_tilde, flow.h, -flow.p2,
                                      e2_anchor)

    ke1_if = flow.psi1_of_y.deriv(flow.h_tilde) ** 2 / 2.0
    rho1_if = float(flow.profiles1.rho(0.0))
    e1_anchor = (float(P2[0]) + ke1_if
                 + rho1_if * g * (flow.h_tilde + d))
    y1, psi1, um1, P1 = layer_profile(flow.psi1_of_y, flow.profiles1,
                                      -d, flow.h_tilde, 0.0, e1_anchor)

    rows = [(1, float(y), float(q), float(u), float(p))
            for y, q, u, p in zip(y1, psi1, um1, P1)]
    rows += [(2, float(y), float(q), float(u), float(p))
             for y, q, u, p in zip(y2, psi2, um2, P2)]
    write_csv(out_dir / "laminar_profile.csv",
              ["layer", "y", "psi", "u_minus_c", "P"], rows)
    return 0


def cmd_audit_grad(cfg: dict, out_dir: Path, seed) -> int:
    state, profiles = _state_from_config(cfg, out_dir)
    maps = _maps_from_config(cfg, state, profiles)
    gravity_refs = _gravity_refs_from_config(cfg, profiles, state)
    n_trials = int(cfg.get("n_trials", 10))
    if n_trials < 1:
        raise ConfigError("n_trials must be >= 1")
    eps_list = [float(e) for e in cfg.get("eps_list", [1e-3, 5e-4, 2.5e-4])]
    if not eps_list:
        raise ConfigError("eps_list must be non-empty")
    tol_grad = _positive(cfg, "tol_grad", 1e-3)
    tol_res = _positive(cfg, "tol_res", 1e-3)
    report = energy.audit_criticality(state, maps, gravity_refs, profiles,
                                      n_trials=n_trials, seed=seed,
                                      tol_grad=tol_grad, tol_res=tol_res)
    write_csv(out_dir / "audit_trials.csv",
              ["trial", "pert_norm", "dH1", "dH2", "dH3", "dH4", "total",
               "normalized"],
              [(t["seed"], t["pert_norm"], t["dH1"], t["dH2"], t["dH3"],
                t["dH4"], t["total"], t["normalized"])
               for t in report.trials])

    # finite-difference sweep: analytic gradient vs central differences
    sweep_rows = []
    n_sweep = int(cfg.get("n_sweep_seeds", 3))
    for t in range(n_sweep):
        trial_seed = seed + t
        pert = st.random_admissible(trial_seed, state)
        pert = pert * (1.0 / st.perturbation_norm(pert, state))
        analytic = energy.first_variation(state, maps, gravity_refs,
                                          pert).total
        prev_err = None
        prev_eps = None
        for eps in eps_list:
            fd = energy.fd_first_variation(state, maps, gravity_refs, pert,
                                           eps)
            abs_err = abs(analytic - fd)
            if prev_err is not None and abs_err > 0 and prev_err > 0:
                order = float(np.log(prev_err / abs_err)
                              / np.log(prev_eps / eps))
            else:
                order = float("nan")
            sweep_rows.append((trial_seed, eps, float(analytic), float(fd),
                               float(abs_err), order))
            prev_err, prev_eps = abs_err, eps
    write_csv(out_dir / "fd_sweep.csv",
              ["seed", "eps", "analytic", "fd", "abs_err", "order_est"],
              sweep_rows)
    write_json(out_dir / "audit.json", report.to_dict())
    return 0


def cmd_audit_hess(cfg: dict, out_dir: Path, seed) -> int:
    state, profiles = _state_from_config(cfg, out_dir)
    maps = _maps_from_config(cfg, state, profiles)
    gravity_refs = _gravity_refs_from_config(cfg, profiles, state)
    eps_list = [float(e) for e in cfg.get("eps_list", [2e-3, 1e-3])]
    if not eps_list:
        raise ConfigError("eps_list must be non-empty")
    n_pairs = int(cfg.get("n_pairs", 5))
    if n_pairs < 1:
        raise ConfigError("n_pairs must be >= 1")
    interior_only = bool(cfg.get("interior_only", True))
    rows = []
    pair_docs = []
    for t in range(n_pairs):
        pa = st.random_admissible(seed + 2 * t, state,
                                  include_surfaces=not interior_only)
        pb = st.random_admissible(seed + 2 * t + 1, state,
                                  include_surfaces=not interior_only)
        pa = pa * (1.0 / st.perturbation_norm(pa, state))
        pb = pb * (1.0 / st.perturbation_norm(pb, state))
        analytic = hessian.second_variation(state, maps, gravity_refs, pa, pb)
        prev_err = None
        prev_eps = None
        fd_vals = []
        for eps in eps_list:
            fd = hessian.fd_second_variation(state, maps, gravity_refs,
                                             pa, pb, eps)
            abs_err = abs(analytic - fd)
            if prev_err is not None and abs_err > 0 and prev_err > 0:
                order = float(np.log(prev_err / abs_err)
                              / np.log(prev_eps / eps))
            else:
                order = float("nan")
            rows.append((t, eps, float(analytic), float(fd), float(abs_err),
                         order))
            fd_vals.append(float(fd))
            prev_err, prev_eps = abs_err, eps
        symmetric = hessian.second_variation(state, maps, gravity_refs,
                                             pb, pa)
        pair_docs.append({"pair": t, "analytic": float(analytic),
                          "fd": fd_vals, "eps": eps_list,
                          "swap_difference": float(analytic - symmetric)})
    write_csv(out_dir / "hess_sweep.csv",
              ["pair", "eps", "analytic", "fd", "abs_err", "order_est"],
              rows)
    write_json(out_dir / "hess_audit.json",
               {"command": "audit-hess", "pairs": pair_docs,
                "interior_only": interior_only})
    return 0


def cmd_stability(cfg: dict, out_dir: Path, seed) -> int:
    state, profiles = _state_from_config(cfg, out_dir)
    maps = _maps_from_config(cfg, state, profiles)
    gravity_refs = _gravity_refs_from_config(cfg, profiles, state)
    basis_size = int(cfg.get("basis_size", 40))
    if basis_size < 1:
        raise ConfigError("basis_size must be >= 1")
    verdict = hessian.stability_verdict(
        state, maps, gravity_refs, profiles,
        restrict_surfaces=bool(cfg.get("restrict_surfaces", True)),
        basis_size=basis_size,
        tol_psd=_positive(cfg, "tol_psd", 1e-8),
        tol_res=_positive(cfg, "tol_res", 1e-3),
        zero_trace=bool(cfg.get("zero_trace", False)))
    doc = verdict.to_dict()
    doc["command"] = "stability"
    write_json(out_dir / "verdict.json", doc)
    write_csv(out_dir / "spectrum.csv", ["index", "eigenvalue"],
              list(enumerate(float(v) for v in verdict.spectrum)))
    return 0


def cmd_manufacture(cfg: dict, out_dir: Path, seed) -> int:
    psi_cfgs = _require(cfg, "psi")
    psi1 = ScalarProfile.from_config(_require(psi_cfgs, "layer1"))
    psi2 = ScalarProfile.from_config(_require(psi_cfgs, "layer2"))
    rho_cfgs = _require(cfg, "rho")
    rho1 = ScalarProfile.from_config(_require(rho_cfgs, "layer1"))
    rho2 = ScalarProfile.from_config(_require(rho_cfgs, "layer2"))
    g = float(_require(cfg, "g"))
    d = float(_require(cfg, "d"))
    h_tilde = float(_require(cfg, "h_tilde"))
    h = float(_require(cfg, "h"))
    (profiles1, profiles2), flow = laminar.manufacture_from_streamfunction(
        psi1, psi2, rho1, rho2, g, d, h_tilde, h)

    nx, ns1, ns2, x_deriv = _grid_config(cfg)
    domain = laminar.flat_domain(flow)
    grids = geo.build_grids(domain, nx, ns1, ns2, x_deriv)
    state = laminar.lift_to_state(flow, grids)
    report = energy.pde_residual(state, profiles1, profiles2)

    warnings = []
    for prof in (profiles1, profiles2):
        lo, hi = _interior_window(prof)
        rep = validate_profiles(prof, g, (-d, h), (lo, hi), 32)
        if not rep.monotone or rep.min_abs_slope < 1e-10:
            warnings.append(
                f"layer {prof.layer_id}: Bernoulli slope map is degenerate "
                f"(min |slope| {rep.min_abs_slope:.3e}); F is not invertible")
    doc = {"command": "manufacture", "flow": flow.to_dict(),
           "residuals": report.summary(), "warnings": warnings}
    write_json(out_dir / "manufactured.json", doc)
    for prof, name in ((profiles1, "beta1.csv"), (profiles2, "beta2.csv")):
        knots = prof.beta.meta["knots"]
        values = prof.beta.meta["values"]
        write_csv(out_dir / name, ["q", "beta"],
                  list(zip(map(float, knots), map(float, values))))
    return 0


def _interior_window(prof: LayerProfiles):
    lo, hi = prof.default_p_window()
    span = hi - lo
    return (lo + 1e-6 * span, hi - 1e-6 * span)


def cmd_residual(cfg: dict, out_dir: Path, seed) -> int:
    state, profiles = _state_from_config(cfg, out_dir)
    report = energy.pde_residual(state, profiles[0], profiles[1])
    doc = {"command": "residual", "residuals": report.summary(),
           "stagnation": laminar.check_no_stagnation(state).ok}
    write_json(out_dir / "residual.json", doc)
    return 0


_DISPATCH = {
    "laminar": cmd_laminar,
    "audit-grad": cmd_audit_grad,
    "audit-hess": cmd_audit_hess,
    "stability": cmd_stability,
    "manufacture": cmd_manufacture,
    "residual": cmd_residual,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="stratwave",
        description="Stratified steady water-wave variational audits")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True)
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    if args.threads is not None:
        os.environ["OMP_NUM_THREADS"] = str(args.threads)
        os.environ["MKL_NUM_THREADS"] = str(args.threads)

    try:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {args.config}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(cfg, dict):
            raise ConfigError("config must be a JSON object")
        declared = cfg.get("command")
        if declared is not None and declared != args.command:
            raise ConfigError(
                f"config command {declared!r} does not match {args.command!r}")
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        seed = args.seed if args.seed is not None else int(cfg.get("seed", 1))
        _write_sidecar(out_dir, args.command, args.config, seed)
        return _DISPATCH[args.command](cfg, out_dir, seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (KeyError, TypeError) as exc:
        print(f"config error: {exc!r}", file=sys.stderr)
        return 2
    except (StratwaveError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
