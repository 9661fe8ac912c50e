"""Pipeline orchestration: config file in, reports, tables, and plots out.

Subcommands:
    analyze  full pipeline (filter, screen, cluster, explain) to an artifact dir
    synth    generate a planted-cluster dataset (data CSV, truth labels, spec)
    render   turn an artifact directory into SVG plots
    explain  re-run the attribution stage from saved per-cluster models

All randomness flows from the single config seed through named sub-streams,
so identical (input, config) pairs produce byte-identical CSV/JSON artifacts
regardless of --threads. Wall-clock timings go to timings.log, never into
manifest.json.

Exit codes: 0 success, 2 config error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py<3.11
    import tomli as tomllib

from . import __version__
from .cca import CcaSolution, cluster_ca, elbow, project_supplementary
from .dataset import (
    CategoricalDataset,
    Schema,
    Variable,
    indicator,
    load_csv,
    skew_filter,
    write_csv,
)
from .ensembles import (
    TreeEnsemble,
    consensus_select,
    decision_margin,
    model_from_json,
    model_to_json,
    predict_proba,
    train_gradient_boosting,
    train_random_forest,
)
from .dataset import IndicatorMatrix
from .errors import ConfigError, DataError, NumericalError, PatticaError
from .seeding import subseed, substream
from .shap import sample_background, shap_summary
from .synth import PlantedSpec, generate

logger = logging.getLogger("pattica")

SEVERITY_COLORS = {"KA": "red", "BC": "blue", "O": "green"}

# key -> (type, default); None default means "must be provided to be used"
_CONFIG_KEYS = {
    "input": (str, None),
    "schema_mode": (str, "infer"),
    "schema_file": (str, ""),
    "target": (str, None),
    "skew_threshold": (float, 0.85),
    "folds": (int, 5),
    "screening_rule": (str, "averaged"),
    "rf_trees": (int, 200),
    "rf_max_depth": (int, 12),
    "rf_min_leaf": (int, 5),
    "rf_feature_subsample": (int, 0),
    "gb_rounds": (int, 100),
    "gb_max_depth": (int, 4),
    "gb_learning_rate": (float, 0.1),
    "gb_min_leaf": (int, 5),
    "gb_lambda": (float, 1.0),
    "K": (int, None),
    "K_range": (list, None),
    "restarts": (int, 20),
    "tol": (float, 1e-10),
    "max_iter": (int, 100),
    "d": (int, 0),
    "include_severity": (bool, False),
    "bg_size": (int, 100),
    "class_mode": (str, "predicted-class"),
    "per_cluster": (bool, True),
    "shap_model": (str, "gradient-boosting"),
    "shap_max_rows": (int, 0),
    "seed": (int, None),
    "synth_n": (int, 2000),
    "synth_Q": (int, 8),
    "synth_categories": (int, 5),
    "synth_K": (int, 4),
    "synth_delta": (float, 0.6),
    "synth_severity": (bool, True),
}


@dataclass
class PipelineConfig:
    """Resolved, validated run settings. Built from a flat TOML file."""

    values: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path, seed_override: int | None = None) -> "PipelineConfig":
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = tomllib.loads(p.read_text())
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        values = {}
        for key, val in raw.items():
            if key not in _CONFIG_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            want, _ = _CONFIG_KEYS[key]
            if want is float and isinstance(val, int) and not isinstance(val, bool):
                val = float(val)
            if not isinstance(val, want) or (want is int and isinstance(val, bool)):
                raise ConfigError(f"config key {key!r} must be {want.__name__}")
            values[key] = val
        if seed_override is not None:
            values["seed"] = seed_override
        cfg = cls(values)
        cfg._validate()
        return cfg

    def _validate(self) -> None:
        v = self.values
        if "seed" not in v:
            raise ConfigError("seed is mandatory (no wall-clock seeding)")
        has_k = "K" in v
        has_range = "K_range" in v
        if has_k == has_range:
            raise ConfigError("exactly one of K or K_range must be set")
        if has_range:
            kr = v["K_range"]
            if (len(kr) != 2 or not all(isinstance(x, int) for x in kr)
                    or not 1 <= kr[0] < kr[1]):
                raise ConfigError("K_range must be [kmin, kmax] with 1 <= kmin < kmax")
        if has_k and v["K"] < 1:
            raise ConfigError("K must be >= 1")
        if v.get("schema_mode", "infer") not in ("infer", "declared"):
            raise ConfigError(f"unknown schema_mode {v.get('schema_mode')!r}")
        if v.get("schema_mode") == "declared" and not v.get("schema_file"):
            raise ConfigError("declared schema_mode requires schema_file")
        if v.get("screening_rule", "averaged") not in ("averaged", "per-fold"):
            raise ConfigError(f"unknown screening_rule {v.get('screening_rule')!r}")
        if v.get("class_mode", "predicted-class") not in ("per-class", "predicted-class"):
            raise ConfigError(f"unknown class_mode {v.get('class_mode')!r}")
        if v.get("shap_model", "gradient-boosting") not in ("gradient-boosting", "random-forest"):
            raise ConfigError(f"unknown shap_model {v.get('shap_model')!r}")
        if not 0.0 < v.get("skew_threshold", 0.85) < 1.0:
            raise ConfigError("skew_threshold must be in (0, 1)")

    def get(self, key: str):
        if key in self.values:
            return self.values[key]
        _, default = _CONFIG_KEYS[key]
        return default

    def require(self, key: str):
        val = self.get(key)
        if val is None:
            raise ConfigError(f"config key {key!r} is required for this command")
        return val

    def echo(self) -> dict:
        """Analysis-relevant settings; excludes anything that may not affect outputs."""
        out = {}
        for key in sorted(_CONFIG_KEYS):
            val = self.get(key)
            if val is not None:
                out[key] = val
        return out


# ---------------------------------------------------------------- artifacts


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_json(path: Path, payload) -> None:
    if isinstance(payload, str):
        text = payload if payload.endswith("\n") else payload + "\n"
    else:
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    path.write_text(text)


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _digest(path: Path) -> str:
    return "sha256:" + hashlib.sha256(path.read_bytes()).hexdigest()


def _load_declared_schema(path: str, target: str) -> Schema:
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"schema file not found: {p}")
    try:
        spec = json.loads(p.read_text())
        variables = tuple(
            Variable(e["name"], tuple(e["categories"])) for e in spec["variables"]
        )
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ConfigError(f"cannot parse schema file {p}: {exc}") from exc
    return Schema(variables, target=target if target in {v.name for v in variables} else None)


def _coords2(M: np.ndarray) -> np.ndarray:
    """First two columns, zero-padded when the solution has fewer dims."""
    out = np.zeros((M.shape[0], 2))
    d = min(2, M.shape[1])
    out[:, :d] = M[:, :d]
    return out


def _per_cluster_wcss(sol: CcaSolution) -> np.ndarray:
    out = np.zeros(sol.K)
    for k in range(sol.K):
        rows = sol.Y[sol.assign == k]
        if rows.shape[0]:
            out[k] = ((rows - sol.G[k]) ** 2).sum()
    return out


def _write_centroids(outdir: Path, sol: CcaSolution) -> list[str]:
    gs = _coords2(sol.G_star)
    wcss = _per_cluster_wcss(sol)
    columns = ["Dim 1", "Dim 2", "Within Cluster Sum of Squares", "Size"]
    rows = []
    for k in range(sol.K):
        rows.append({
            "cluster": k + 1,
            "Dim 1": float(gs[k, 0]),
            "Dim 2": float(gs[k, 1]),
            "Within Cluster Sum of Squares": float(wcss[k]),
            "Size": int(sol.sizes[k]),
        })
    _write_json(outdir / "centroids.json", {"columns": columns, "rows": rows})

    widths = [9, 12, 12, 31, 8]
    header = ["Cluster"] + columns
    lines = ["".join(h.rjust(w) for h, w in zip(header, widths))]
    for r in rows:
        cells = [str(r["cluster"]), f"{r['Dim 1']:.4f}", f"{r['Dim 2']:.4f}",
                 f"{r['Within Cluster Sum of Squares']:.4f}", str(r["Size"])]
        lines.append("".join(c.rjust(w) for c, w in zip(cells, widths)))
    (outdir / "centroids.txt").write_text("\n".join(lines) + "\n")
    return ["centroids.json", "centroids.txt"]


def _write_biplot(
    outdir: Path, Z, sol: CcaSolution, supplementary: dict | None,
    supplementary_var: str = "",
) -> None:
    rows = []
    bs = _coords2(sol.B_star)
    for label, (x, y) in zip(Z.column_labels(), bs):
        rows.append([label, "category", _fmt(x), _fmt(y)])
    gs = _coords2(sol.G_star)
    for k in range(sol.K):
        rows.append([f"cluster {k + 1}", "centroid", _fmt(gs[k, 0]), _fmt(gs[k, 1])])
    if supplementary:
        prefix = f"{supplementary_var}=" if supplementary_var else ""
        for cat, coords in supplementary.items():
            pt = _coords2(np.asarray(coords)[None, :])[0]
            rows.append([f"{prefix}{cat}", "supplementary", _fmt(pt[0]), _fmt(pt[1])])
    _write_csv(outdir / "biplot.csv", ["label", "kind", "dim1", "dim2"], rows)


# ------------------------------------------------------------------ analyze


def _train_severity_model(cfg: PipelineConfig, Z, y, classes, seed_key: int) -> TreeEnsemble:
    if cfg.get("shap_model") == "random-forest":
        sub = cfg.get("rf_feature_subsample") or None
        return train_random_forest(
            Z, y, classes,
            n_trees=cfg.get("rf_trees"), max_depth=cfg.get("rf_max_depth"),
            min_leaf=cfg.get("rf_min_leaf"), feature_subsample=sub,
            seed=subseed(cfg.get("seed"), "trees", seed_key),
        )
    return train_gradient_boosting(
        Z, y, classes,
        n_rounds=cfg.get("gb_rounds"), max_depth=cfg.get("gb_max_depth"),
        learning_rate=cfg.get("gb_learning_rate"), min_leaf=cfg.get("gb_min_leaf"),
        reg_lambda=cfg.get("gb_lambda"),
        seed=subseed(cfg.get("seed"), "trees", seed_key),
    )


def _explain_clusters(
    cfg: PipelineConfig,
    ds: CategoricalDataset,
    assign: np.ndarray,
    K: int,
    outdir: Path,
    model_vars: tuple[str, ...],
    saved_models: dict[int, TreeEnsemble] | None = None,
) -> list[str]:
    """Train (or reuse) severity models and write per-cluster attribution CSVs."""
    target = cfg.require("target")
    ti = ds.schema.index_of(target)
    classes = ds.schema.variables[ti].categories
    Zm = indicator(ds, active_vars=model_vars)
    y = ds.target_codes
    seed = cfg.get("seed")
    files = []

    global_model = None
    if saved_models is None and not cfg.get("per_cluster"):
        global_model = _train_severity_model(cfg, Zm, y, classes, 0)
        _write_json(outdir / "model_global.json", model_to_json(global_model))
        files.append("model_global.json")

    cap = cfg.get("shap_max_rows")
    for k in range(K):
        members = np.flatnonzero(assign == k)
        if members.size == 0:
            raise DataError(f"cluster {k + 1} is empty; nothing to explain")
        if saved_models is not None:
            model = saved_models[k]
        elif global_model is not None:
            model = global_model
        else:
            Zk = IndicatorMatrix(
                Z=np.ascontiguousarray(Zm.Z[members]), blocks=Zm.blocks,
                var_names=Zm.var_names, categories=Zm.categories,
            )
            model = _train_severity_model(cfg, Zk, y[members], classes, k + 1)
            _write_json(outdir / f"model_cluster_{k + 1}.json", model_to_json(model))
            files.append(f"model_cluster_{k + 1}.json")

        explain_rows = members if cap <= 0 else members[:cap]
        bg = sample_background(
            Zm.Z[members], cfg.get("bg_size"), seed, k,
            source=f"cluster {k + 1} rows",
        )
        expl = shap_summary(model, Zm.Z[explain_rows], bg, class_mode=cfg.get("class_mode"))

        header = ["row_id", "predicted_class"]
        for v in expl.feature_names:
            for c in expl.classes:
                header.append(f"phi_{v}_{c}")
        rows = []
        for i, ridx in enumerate(explain_rows):
            row = [str(int(ridx)), expl.classes[expl.predicted_class[i]]]
            for vi in range(len(expl.feature_names)):
                for ci in range(len(expl.classes)):
                    row.append(_fmt(expl.phi[i, vi, ci]))
            rows.append(row)
        _write_csv(outdir / f"shap_cluster_{k + 1}.csv", header, rows)
        _write_json(outdir / f"shap_cluster_{k + 1}.json", expl.sidecar_json())
        files += [f"shap_cluster_{k + 1}.csv", f"shap_cluster_{k + 1}.json"]
        logger.info("explained cluster %d: %d rows, %d background", k + 1,
                    len(explain_rows), bg.size)
    return files


def analyze(cfg: PipelineConfig, outdir: str | Path, threads: int = 1) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    input_path = Path(cfg.require("input"))
    if not input_path.exists():
        raise DataError(f"input file not found: {input_path}")
    target = cfg.require("target")
    seed = cfg.get("seed")
    stages: dict[str, dict] = {}
    timings: list[tuple[str, float]] = []

    def record(stage: str, t0: float, names: list[str]) -> None:
        stages[stage] = {"outputs": {n: _digest(outdir / n) for n in sorted(names)}}
        timings.append((stage, time.perf_counter() - t0))

    # load + skew filter
    t0 = time.perf_counter()
    schema = None
    if cfg.get("schema_mode") == "declared":
        schema = _load_declared_schema(cfg.get("schema_file"), target)
    ds = load_csv(input_path, schema_mode=cfg.get("schema_mode"), schema=schema,
                  target=target)
    ds, filter_report = skew_filter(ds, cfg.get("skew_threshold"))
    _write_json(outdir / "filter_report.json", filter_report.to_json())
    record("filter", t0, ["filter_report.json"])
    logger.info("filter: %d variables kept", len(ds.schema.names) - 1)

    # consensus screening
    t0 = time.perf_counter()
    rf_sub = cfg.get("rf_feature_subsample") or None
    screening = consensus_select(
        ds, target, folds=cfg.get("folds"),
        rf_params={
            "n_trees": cfg.get("rf_trees"), "max_depth": cfg.get("rf_max_depth"),
            "min_leaf": cfg.get("rf_min_leaf"), "feature_subsample": rf_sub,
        },
        gb_params={
            "n_rounds": cfg.get("gb_rounds"), "max_depth": cfg.get("gb_max_depth"),
            "learning_rate": cfg.get("gb_learning_rate"),
            "min_leaf": cfg.get("gb_min_leaf"), "reg_lambda": cfg.get("gb_lambda"),
        },
        seed=seed, rule=cfg.get("screening_rule"),
    )
    _write_json(outdir / "screening_report.json", screening.to_json())
    record("screening", t0, ["screening_report.json"])
    selected = screening.selected()
    if not selected:
        raise DataError("screening selected no variables; relax the rule or folds")
    logger.info("screening: selected %s", ", ".join(selected))

    # clustering
    t0 = time.perf_counter()
    active = tuple(selected)
    if cfg.get("include_severity"):
        active = active + (target,)
    Z = indicator(ds, active_vars=active)
    d_override = cfg.get("d") or None
    cluster_files = []
    knee = None
    if "K_range" in cfg.values:
        kmin, kmax = cfg.get("K_range")
        curve = elbow(
            Z, K_range=range(kmin, kmax + 1), restarts=cfg.get("restarts"),
            tol=cfg.get("tol"), max_iter=cfg.get("max_iter"), seed=seed,
            threads=threads,
        )
        knee = curve.knee
        _write_csv(
            outdir / "elbow.csv", ["K", "normalized_wcss", "is_knee"],
            [[str(k), _fmt(w), str(int(k == knee))] for k, w in curve.points],
        )
        cluster_files.append("elbow.csv")
        sol = curve.solutions[knee]
        logger.info("elbow: knee at K=%d", knee)
    else:
        sol = cluster_ca(
            Z, cfg.get("K"), restarts=cfg.get("restarts"), tol=cfg.get("tol"),
            max_iter=cfg.get("max_iter"), seed=seed, d=d_override, threads=threads,
        )
    _write_csv(
        outdir / "clusters.csv", ["row_id", "cluster"],
        [[str(i), str(int(c) + 1)] for i, c in enumerate(sol.assign)],
    )
    cluster_files += ["clusters.csv"] + _write_centroids(outdir, sol)
    supplementary = None
    if target not in active:
        supplementary = project_supplementary(target, ds, Z, sol)
    _write_biplot(outdir, Z, sol, supplementary, supplementary_var=target)
    cluster_files.append("biplot.csv")
    record("clustering", t0, cluster_files)
    logger.info("clustering: K=%d, wcss/tss=%.4f", sol.K, sol.normalized_wcss)

    # per-cluster severity models + attribution
    t0 = time.perf_counter()
    explain_files = _explain_clusters(cfg, ds, sol.assign, sol.K, outdir, tuple(selected))
    record("explain", t0, explain_files)

    manifest = {
        "version": __version__,
        "config": cfg.echo(),
        "input_digest": _digest(input_path),
        "knee": knee,
        "stages": stages,
    }
    _write_json(outdir / "manifest.json", manifest)
    with open(outdir / "timings.log", "w") as fh:
        for stage, dt in timings:
            fh.write(f"{stage}\t{dt:.3f}s\n")
    return outdir


# -------------------------------------------------------------------- synth


def run_synth(cfg: PipelineConfig, outdir: str | Path) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    link = None
    if cfg.get("synth_severity"):
        base = (0.6, 0.25, 0.15)
        link = {
            k: tuple(np.roll(base, k % 3)) for k in range(cfg.get("synth_K"))
        }
    spec = PlantedSpec(
        n=cfg.get("synth_n"), Q=cfg.get("synth_Q"),
        n_categories=cfg.get("synth_categories"), K_true=cfg.get("synth_K"),
        delta=cfg.get("synth_delta"), severity_link=link, seed=cfg.get("seed"),
    )
    planted = generate(spec)
    write_csv(planted.dataset, outdir / "data.csv")
    _write_csv(
        outdir / "labels.csv", ["row_id", "true_cluster"],
        [[str(i), str(int(c))] for i, c in enumerate(planted.true_labels)],
    )
    _write_json(outdir / "spec.json", spec.to_json())
    logger.info("synth: %d rows, %d variables, K_true=%d", spec.n, spec.Q, spec.K_true)
    return outdir


# ------------------------------------------------------------------ explain


def run_explain(cfg: PipelineConfig, outdir: str | Path) -> Path:
    """Re-run the attribution stage from models saved by a previous analyze."""
    outdir = Path(outdir)
    clusters_path = outdir / "clusters.csv"
    if not clusters_path.exists():
        raise DataError(f"missing artifact: {clusters_path}")
    with open(clusters_path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assign = np.array([int(r["cluster"]) - 1 for r in rows], dtype=np.int32)
    K = int(assign.max()) + 1

    saved = {}
    for k in range(K):
        mp = outdir / f"model_cluster_{k + 1}.json"
        if not mp.exists():
            mp = outdir / "model_global.json"
        if not mp.exists():
            raise DataError(f"missing artifact: {outdir / f'model_cluster_{k + 1}.json'}")
        saved[k] = model_from_json(mp.read_text())

    input_path = Path(cfg.require("input"))
    if not input_path.exists():
        raise DataError(f"input file not found: {input_path}")
    target = cfg.require("target")
    schema = None
    if cfg.get("schema_mode") == "declared":
        schema = _load_declared_schema(cfg.get("schema_file"), target)
    ds = load_csv(input_path, schema_mode=cfg.get("schema_mode"), schema=schema,
                  target=target)
    if assign.shape[0] != ds.n:
        raise DataError("clusters.csv row count does not match the input")

    model_vars = saved[0].var_names
    _explain_clusters(cfg, ds, assign, K, outdir, model_vars, saved_models=saved)
    return outdir


# ------------------------------------------------------------------- render


def render_plots(outdir: str | Path, seed: int | None = None) -> list[Path]:
    """SVG plots from a finished artifact directory; deterministic output bytes."""
    import matplotlib

    matplotlib.use("svg", force=True)
    matplotlib.rcParams["svg.hashsalt"] = "pattica"
    matplotlib.rcParams["svg.fonttype"] = "none"
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    biplot_path = outdir / "biplot.csv"
    if not biplot_path.exists():
        raise DataError(f"missing artifact: {biplot_path}")
    if seed is None:
        manifest_path = outdir / "manifest.json"
        seed = 0
        if manifest_path.exists():
            seed = json.loads(manifest_path.read_text())["config"].get("seed", 0)

    written = []

    def save(fig, name: str) -> None:
        path = outdir / name
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)

    elbow_path = outdir / "elbow.csv"
    if elbow_path.exists():
        with open(elbow_path, newline="") as fh:
            pts = [(int(r["K"]), float(r["normalized_wcss"]), r["is_knee"] == "1")
                   for r in csv.DictReader(fh)]
        fig, ax = plt.subplots(figsize=(6, 4))
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", color="black")
        for k, w, is_knee in pts:
            if is_knee:
                ax.axvline(k, linestyle="--", color="red")
                ax.annotate(f"knee K={k}", (k, w), textcoords="offset points",
                            xytext=(8, 8), color="red")
        ax.set_xlabel("K")
        ax.set_ylabel("normalized WCSS")
        ax.set_title("Within-cluster sum of squares by cluster count")
        fig.tight_layout()
        save(fig, "elbow.svg")

    with open(biplot_path, newline="") as fh:
        marks = list(csv.DictReader(fh))
    cats = [(m["label"], float(m["dim1"]), float(m["dim2"]))
            for m in marks if m["kind"] == "category"]
    cents = [(m["label"], float(m["dim1"]), float(m["dim2"]))
             for m in marks if m["kind"] == "centroid"]
    supp = [(m["label"], float(m["dim1"]), float(m["dim2"]))
            for m in marks if m["kind"] == "supplementary"]
    for k, (label, cx, cy) in enumerate(cents, start=1):
        fig, ax = plt.subplots(figsize=(6, 5))
        ax.axhline(0, color="0.8", linewidth=0.8)
        ax.axvline(0, color="0.8", linewidth=0.8)
        ax.scatter([c[1] for c in cats], [c[2] for c in cats], s=12, color="0.4")
        for name, x, y in cats:
            ax.annotate(name, (x, y), fontsize=5, alpha=0.7,
                        textcoords="offset points", xytext=(2, 2))
        ax.scatter([c[1] for c in cents], [c[2] for c in cents], s=30,
                   color="0.7", marker="s")
        ax.scatter([cx], [cy], s=120, color="red", marker="*", zorder=5)
        ax.annotate(label, (cx, cy), color="red", fontweight="bold",
                    textcoords="offset points", xytext=(6, 6))
        if supp:
            ax.scatter([s[1] for s in supp], [s[2] for s in supp], s=40,
                       color="green", marker="^", zorder=4)
            for name, x, y in supp:
                ax.annotate(name, (x, y), fontsize=6, color="green",
                            textcoords="offset points", xytext=(3, -8))
        ax.set_xlabel("Dim 1")
        ax.set_ylabel("Dim 2")
        ax.set_title(f"Categories and centroid, {label}")
        fig.tight_layout()
        save(fig, f"cluster_{k}.svg")

    k = 0
    while True:
        k += 1
        csv_path = outdir / f"shap_cluster_{k}.csv"
        side_path = outdir / f"shap_cluster_{k}.json"
        if not csv_path.exists():
            break
        sidecar = json.loads(side_path.read_text())
        classes = sidecar["classes"]
        order = sidecar["feature_order"]
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        rng = substream(seed, "render", k)
        fig, ax = plt.subplots(figsize=(7, 0.5 * len(order) + 2))
        for fi, feat in enumerate(order):
            ypos = len(order) - 1 - fi
            xs, colors = [], []
            for r in rows:
                cls = r["predicted_class"]
                xs.append(float(r[f"phi_{feat}_{cls}"]))
                colors.append(SEVERITY_COLORS.get(cls, "0.5"))
            jitter = (rng.random(len(xs)) - 0.5) * 0.6
            ax.scatter(xs, ypos + jitter, s=8, c=colors, alpha=0.7, linewidths=0)
        ax.axvline(0, color="0.7", linewidth=0.8)
        ax.set_yticks(range(len(order)))
        ax.set_yticklabels(list(reversed(order)))
        space = sidecar.get("space", "")
        ax.set_xlabel(f"Shapley value ({space})" if space else "Shapley value")
        ax.set_title(f"Per-variable attribution, cluster {k}")
        handles = [plt.Line2D([], [], marker="o", linestyle="", color=c, label=lbl)
                   for lbl, c in SEVERITY_COLORS.items() if lbl in classes]
        if handles:
            ax.legend(handles=handles, title="predicted class", fontsize=7)
        fig.tight_layout()
        save(fig, f"shap_{k}.svg")

    logger.info("rendered %d SVG files", len(written))
    return written


# --------------------------------------------------------------------- main


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pattica",
        description="Co-occurrence pattern discovery with exact Shapley explanations",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("analyze", "run the full pipeline into an artifact directory"),
        ("synth", "generate a planted-cluster dataset"),
        ("render", "render SVG plots from an artifact directory"),
        ("explain", "re-run attribution from saved models"),
    ):
        p = sub.add_parser(name, help=help_text)
        if name != "render":
            p.add_argument("--config", required=True, help="TOML config file")
        else:
            p.add_argument("--config", help="TOML config file (optional)")
        p.add_argument("--out", required=True, help="artifact directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--threads", type=int, default=1,
                       help="max parallelism; never affects outputs")
        p.add_argument("--verbose", action="store_true", help="progress on stderr")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(message)s",
    )
    try:
        if args.command == "render":
            cfg_seed = args.seed
            if cfg_seed is None and args.config:
                cfg_seed = PipelineConfig.from_file(args.config).get("seed")
            render_plots(args.out, seed=cfg_seed)
            return 0
        cfg = PipelineConfig.from_file(args.config, seed_override=args.seed)
        if args.command == "analyze":
            analyze(cfg, args.out, threads=max(1, args.threads))
        elif args.command == "synth":
            run_synth(cfg, args.out)
        elif args.command == "explain":
            run_explain(cfg, args.out)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except PatticaError as exc:  # pragma: no cover - future subclasses
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
