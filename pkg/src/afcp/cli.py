"""Command-line entry points, JSON run configs and CSV ingestion.

Subcommands:

``run``      execute an experiment described by a JSON config, write CSV + Markdown
``gen``      write a synthetic dataset as CSV plus a column-roles sidecar
``predict``  calibrate on one CSV, predict on another, emit JSON lines
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Sequence

import jsonschema
import numpy as np

from .data import Attribute, AttributeSpec, Dataset, InputError
from .harness import (
    CLASSIFY_METHODS,
    EXPERIMENT_MLP,
    EXPERIMENT_ONECLASS,
    OUTLIER_METHODS,
    ExperimentConfig,
    Preprocess,
    run_experiment,
)
from .models import MlpConfig, external_scores, fit_oneclass, fit_softmax_mlp
from .scores import aps_scores, record_uniforms
from .sets import (
    CalibrationPool,
    afcp_label_conditional_sets,
    afcp_outlier_pvalues,
    afcp_plus_sets,
    afcp_sets,
    exhaustive_outlier_pvalues,
    exhaustive_sets,
    marginal_lc_sets,
    marginal_outlier_pvalues,
    marginal_sets,
    partial_outlier_pvalues,
    partial_sets,
)
from .synth import MEDICAL_SPEC, MedicalSynthConfig, OutlierSynthConfig, gen_medical, gen_outlier

ENV_SEED = "AFCP_SEED"
ENV_OUT = "AFCP_OUT"

# ---------------------------------------------------------------- CSV ingestion


@dataclass(frozen=True)
class ColumnRoles:
    label_column: str | None = None
    attribute_columns: tuple[str, ...] = ()
    feature_columns: tuple[str, ...] = ()
    probability_columns: tuple[str, ...] = ()
    levels: dict[str, tuple[str, ...]] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnRoles":
        jsonschema.validate(d, ROLES_SCHEMA)
        return cls(
            d.get("label_column"),
            tuple(d.get("attribute_columns", ())),
            tuple(d.get("feature_columns", ())),
            tuple(d.get("probability_columns", ())),
            {k: tuple(v) for k, v in d.get("levels", {}).items()},
        )

    def to_dict(self) -> dict:
        out = {
            "label_column": self.label_column,
            "attribute_columns": list(self.attribute_columns),
            "feature_columns": list(self.feature_columns),
            "levels": {k: list(v) for k, v in self.levels.items()},
        }
        if self.probability_columns:
            out["probability_columns"] = list(self.probability_columns)
        return out


ROLES_SCHEMA = {
    "type": "object",
    "properties": {
        "label_column": {"type": ["string", "null"]},
        "attribute_columns": {"type": "array", "items": {"type": "string"}},
        "feature_columns": {"type": "array", "items": {"type": "string"}},
        "probability_columns": {"type": "array", "items": {"type": "string"}},
        "levels": {
            "type": "object",
            "additionalProperties": {"type": "array", "items": {"type": "string"}},
        },
    },
    "additionalProperties": False,
}


@dataclass
class Ingested:
    dataset: Dataset
    dictionaries: dict[str, list[str]]
    probabilities: np.ndarray | None = None


def _code(dictionary: list[str], value: str, fixed: bool, column: str, row: int) -> int:
    try:
        return dictionary.index(value)
    except ValueError:
        if fixed:
            raise InputError(f"row {row}: value {value!r} not among the declared levels of {column!r}") from None
        dictionary.append(value)
        return len(dictionary) - 1


def read_columns(path, roles: ColumnRoles, dictionaries: dict[str, list[str]] | None = None,
                 allow_empty: bool = False, require_label: bool = True):
    """Parse ``path`` into coded columns, extending ``dictionaries`` in place.

    Row numbers in error messages count the header as row 1.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"{path}: file not found")
    dictionaries = {} if dictionaries is None else dictionaries
    for col, levels in roles.levels.items():
        dictionaries.setdefault(col, list(levels))
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty dataset")
        index = {name: i for i, name in enumerate(header)}
        label_col = roles.label_column if roles.label_column in index or require_label else None
        wanted = [*roles.attribute_columns, *roles.feature_columns, *roles.probability_columns]
        if label_col is not None:
            wanted.append(label_col)
        for col in wanted:
            if col not in index:
                raise InputError(f"{path}: missing column {col!r}")
        numeric_cols = [*roles.feature_columns, *roles.probability_columns]
        feats, probs, attrs, labels = [], [], [], []
        for rownum, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise InputError(f"{path}: row {rownum} has {len(row)} fields, expected {len(header)}")
            for col in wanted:
                if row[index[col]].strip() == "":
                    raise InputError(f"{path}: row {rownum}: missing value in column {col!r}")
            values = []
            for col in numeric_cols:
                try:
                    values.append(float(row[index[col]]))
                except ValueError:
                    raise InputError(f"{path}: row {rownum}: cannot parse {row[index[col]]!r} in column {col!r}") from None
            feats.append(values[: len(roles.feature_columns)])
            probs.append(values[len(roles.feature_columns):])
            attrs.append([
                _code(dictionaries.setdefault(c, []), row[index[c]], c in roles.levels, c, rownum)
                for c in roles.attribute_columns
            ])
            if label_col is not None:
                labels.append(_code(dictionaries.setdefault(label_col, []), row[index[label_col]],
                                    label_col in roles.levels, label_col, rownum))
    if not feats and not allow_empty:
        raise InputError(f"{path}: empty dataset")
    n = len(feats)
    return (
        np.asarray(feats, dtype=float).reshape(n, len(roles.feature_columns)),
        np.asarray(attrs, dtype=np.int64).reshape(n, len(roles.attribute_columns)),
        np.asarray(labels, dtype=np.int64) if label_col is not None else None,
        np.asarray(probs, dtype=float).reshape(n, len(roles.probability_columns)),
        dictionaries,
    )


def build_spec(roles: ColumnRoles, dictionaries: dict[str, list[str]]) -> AttributeSpec:
    return AttributeSpec(tuple(
        Attribute(c, max(1, len(dictionaries.get(c, []))), k,
                  tuple(dictionaries[c]) if dictionaries.get(c) else ())
        for k, c in enumerate(roles.attribute_columns)
    ))


def ingest_tables(paths: Sequence, roles: ColumnRoles, allow_empty: Sequence[bool] | None = None,
                  require_label: Sequence[bool] | None = None, id_offsets: bool = True) -> list[Ingested]:
    """Ingest several files with shared level dictionaries and one attribute spec.

    Record ids run consecutively across files so per-record randomization
    never repeats between them.
    """
    dictionaries: dict[str, list[str]] = {}
    parsed = []
    for j, p in enumerate(paths):
        empty_ok = bool(allow_empty[j]) if allow_empty else False
        need_label = bool(require_label[j]) if require_label else True
        parsed.append(read_columns(p, roles, dictionaries, empty_ok, need_label))
    spec = build_spec(roles, dictionaries)
    n_labels = len(dictionaries.get(roles.label_column, [])) if roles.label_column else 0
    out, offset = [], 0
    for feats, attrs, labels, probs, _ in parsed:
        n = feats.shape[0]
        ids = np.arange(offset, offset + n) if id_offsets else None
        data = Dataset(feats, attrs, spec, labels, n_labels, ids)
        out.append(Ingested(data, {k: list(v) for k, v in dictionaries.items()},
                            probs if roles.probability_columns else None))
        offset += n
    return out


def ingest_csv(path, roles: ColumnRoles | dict, allow_empty: bool = False) -> Ingested:
    if isinstance(roles, dict):
        roles = ColumnRoles.from_dict(roles)
    return ingest_tables([path], roles, [allow_empty], id_offsets=False)[0]


def write_csv(data: Dataset, path, feature_names: Sequence[str] | None = None,
              label_name: str = "label") -> ColumnRoles:
    """Write ``data`` so that :func:`ingest_csv` with the returned roles reproduces it."""
    feature_names = list(feature_names or [f"x{j}" for j in range(data.features.shape[1])])
    attr_names = list(data.spec.names)
    levels = {a.name: [a.level_name(m) for m in range(a.levels)] for a in data.spec.attributes}
    header = [*feature_names, *attr_names]
    if data.labels is not None:
        header.append(label_name)
        levels[label_name] = [str(y) for y in range(data.n_labels)]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for i in range(data.n):
            row = [repr(float(v)) for v in data.features[i]]
            row += [data.spec.attributes[k].level_name(int(c)) for k, c in enumerate(data.attributes[i])]
            if data.labels is not None:
                row.append(str(int(data.labels[i])))
            w.writerow(row)
    return ColumnRoles(label_name if data.labels is not None else None, tuple(attr_names),
                       tuple(feature_names), (), {k: tuple(v) for k, v in levels.items()})


# ------------------------------------------------------------------ run configs

RUN_SCHEMA = {
    "type": "object",
    "required": ["kind", "data", "methods"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string", "minLength": 1},
        "kind": {"enum": ["classify", "outlier"]},
        "data": {
            "type": "object",
            "required": ["source"],
            "additionalProperties": False,
            "properties": {
                "source": {"enum": ["synthetic-medical", "synthetic-outlier", "csv"]},
                "path": {"type": "string"},
                "roles": ROLES_SCHEMA,
                "blue_prob": {"type": "number", "minimum": 0, "maximum": 1},
            },
        },
        "preprocessing": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["op", "attribute", "level"],
                "additionalProperties": False,
                "properties": {
                    "op": {"enum": ["label_noise", "downsample"]},
                    "attribute": {"type": "string"},
                    "level": {"type": "string"},
                    "width": {"type": "number", "minimum": 0},
                    "keep_fraction": {"type": "number", "minimum": 0, "maximum": 1},
                },
            },
        },
        "methods": {"type": "array", "minItems": 1, "items": {"type": "string"}},
        "alpha": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "sample_sizes": {"type": "array", "minItems": 1, "items": {"type": "integer", "minimum": 4}},
        "n_test": {"type": "integer", "minimum": 1},
        "n_reps": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "output_dir": {"type": "string"},
        "test_level": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "max_picks": {"type": "integer", "minimum": 1},
        "model": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "hidden_layers": {"type": "array", "items": {"type": "integer", "minimum": 1}},
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "epochs": {"type": "integer", "minimum": 0},
            },
        },
    },
}


@dataclass(frozen=True)
class RunConfig:
    kind: str
    data: dict
    methods: tuple[str, ...]
    name: str = "experiment"
    preprocessing: tuple[dict, ...] = ()
    alpha: float = 0.1
    sample_sizes: tuple[int, ...] = (200, 2000)
    n_test: int = 500
    n_reps: int | None = None
    seed: int = 0
    output_dir: str = "results"
    test_level: float = 0.05
    max_picks: int = 1
    model: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        try:
            jsonschema.validate(d, RUN_SCHEMA)
        except jsonschema.ValidationError as e:
            where = "/".join(str(p) for p in e.absolute_path) or "config"
            raise InputError(f"invalid config at {where}: {e.message}") from None
        allowed = CLASSIFY_METHODS if d["kind"] == "classify" else OUTLIER_METHODS
        bad = [m for m in d["methods"] if m not in allowed]
        if bad:
            raise InputError(f"methods {bad} are not available for kind {d['kind']!r}")
        source = d["data"]["source"]
        if source == "csv" and ("path" not in d["data"] or "roles" not in d["data"]):
            raise InputError("csv data source needs 'path' and 'roles'")
        if (d["kind"], source) in (("classify", "synthetic-outlier"), ("outlier", "synthetic-medical")):
            raise InputError(f"data source {source!r} does not fit kind {d['kind']!r}")
        kw = dict(d)
        for key in ("methods", "sample_sizes"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "preprocessing" in kw:
            kw["preprocessing"] = tuple(dict(p) for p in kw["preprocessing"])
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as e:
            raise InputError(f"{path}: {e.strerror}") from None
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as e:
            raise InputError(f"{path}: line {e.lineno}: {e.msg}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["sample_sizes"] = list(self.sample_sizes)
        d["preprocessing"] = [dict(p) for p in self.preprocessing]
        if d["n_reps"] is None:
            del d["n_reps"]
        return d

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def with_overrides(self, seed: int | None = None, output_dir: str | None = None) -> "RunConfig":
        d = self.to_dict()
        if seed is not None:
            d["seed"] = int(seed)
        if output_dir is not None:
            d["output_dir"] = output_dir
        return RunConfig.from_dict(d)

    def experiment(self, base_dir: Path | None = None) -> ExperimentConfig:
        pool = None
        if self.data["source"] == "csv":
            roles = ColumnRoles.from_dict(self.data["roles"])
            path = Path(self.data["path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            pool = ingest_csv(path, roles).dataset
            spec = pool.spec
        else:
            spec = MEDICAL_SPEC
        steps = []
        for p in self.preprocessing:
            k = spec.index(p["attribute"])
            a = spec.attributes[k]
            names = [a.level_name(m) for m in range(a.levels)]
            if p["level"] not in names:
                raise InputError(f"unknown level {p['level']!r} for attribute {p['attribute']!r}")
            steps.append(Preprocess(p["op"], k, names.index(p["level"]),
                                    p.get("width", 2.0), p.get("keep_fraction", 1.0)))
        base_model = EXPERIMENT_MLP if self.kind == "classify" else EXPERIMENT_ONECLASS
        model = MlpConfig(
            tuple(self.model.get("hidden_layers", base_model.hidden_layers)),
            self.model.get("learning_rate", base_model.learning_rate),
            self.model.get("epochs", base_model.epochs),
        )
        return ExperimentConfig(
            kind=self.kind,
            methods=self.methods,
            sample_sizes=self.sample_sizes,
            n_test=self.n_test,
            n_reps=self.n_reps,
            alpha=self.alpha,
            blue_prob=self.data.get("blue_prob", 0.1),
            model=model,
            test_level=self.test_level,
            max_picks=self.max_picks,
            seed=self.seed,
            preprocessing=tuple(steps),
            pool=pool,
        )


def bundled_configs() -> list[str]:
    root = resources.files("afcp") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def resolve_config(name_or_path: str) -> tuple[RunConfig, Path | None]:
    path = Path(name_or_path)
    if path.exists():
        return RunConfig.load(path), path.parent
    if name_or_path in bundled_configs():
        text = (resources.files("afcp") / "configs" / f"{name_or_path}.json").read_text(encoding="utf-8")
        return RunConfig.from_dict(json.loads(text)), None
    raise InputError(f"config {name_or_path!r} not found (bundled: {', '.join(bundled_configs())})")


# -------------------------------------------------------------------- commands


def _env_int(name: str) -> int | None:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{name} must be an integer, got {raw!r}") from None


def cmd_run(args) -> int:
    cfg, base = resolve_config(args.config)
    seed = args.seed if args.seed is not None else _env_int(ENV_SEED)
    out = args.out if args.out is not None else os.environ.get(ENV_OUT) or None
    cfg = cfg.with_overrides(seed, out)
    table = run_experiment(cfg.experiment(base), jobs=args.jobs)
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.name}.csv"
    md_path = out_dir / f"{cfg.name}.md"
    csv_path.write_text(table.to_csv(), encoding="utf-8")
    md_path.write_text(table.to_markdown(), encoding="utf-8")
    print(csv_path)
    print(md_path)
    return 0


def cmd_gen(args) -> int:
    seed = args.seed if args.seed is not None else (_env_int(ENV_SEED) or 0)
    out_dir = Path(args.out if args.out is not None else os.environ.get(ENV_OUT) or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.kind == "medical":
        data = gen_medical(MedicalSynthConfig(args.n, args.blue_prob, seed=seed))
    else:
        data = gen_outlier(OutlierSynthConfig(args.n, args.blue_prob, seed=seed))
    csv_path = out_dir / f"{args.name}.csv"
    roles = write_csv(data, csv_path)
    roles_path = out_dir / f"{args.name}.roles.json"
    roles_path.write_text(json.dumps(roles.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(csv_path)
    print(roles_path)
    return 0


def _classify_masks(method: str, pool: CalibrationPool, scores, attrs, alpha: float, test_level: float):
    if method == "marginal":
        return marginal_sets(pool, scores, alpha), None
    if method == "exhaustive":
        return exhaustive_sets(pool, scores, attrs, alpha), None
    if method == "partial":
        return partial_sets(pool, scores, attrs, alpha), None
    if method == "marginal_lc":
        return marginal_lc_sets(pool, scores, alpha), None
    if method in ("afcp", "afcp1"):
        out = afcp_sets(pool, scores, attrs, alpha, always_select=method == "afcp1", test_level=test_level)
    elif method == "afcp_plus":
        out = afcp_plus_sets(pool, scores, attrs, alpha, test_level=test_level)
    else:
        out = afcp_label_conditional_sets(pool, scores, attrs, alpha, test_level=test_level)
    return out.mask, out


def _outlier_pvalues(method: str, pool: CalibrationPool, scores, attrs, alpha: float, test_level: float, J: int):
    if method == "marginal":
        return marginal_outlier_pvalues(pool, scores), None
    if method == "exhaustive":
        return exhaustive_outlier_pvalues(pool, scores, attrs), None
    if method == "partial":
        return partial_outlier_pvalues(pool, scores, attrs), None
    out = afcp_outlier_pvalues(pool, scores, attrs, alpha, J, always_select=method == "afcp1", test_level=test_level)
    return out.pvalues, out.selected


def cmd_predict(args) -> int:
    roles = ColumnRoles.from_dict(json.loads(Path(args.roles).read_text(encoding="utf-8")))
    seed = args.seed if args.seed is not None else (_env_int(ENV_SEED) or 0)
    allowed = CLASSIFY_METHODS if args.kind == "classify" else OUTLIER_METHODS
    if args.method not in allowed:
        raise InputError(f"method {args.method!r} is not available for kind {args.kind!r}")
    if roles.label_column is None:
        raise InputError("roles must name a label column")
    paths = [args.calib, args.test]
    if args.train:
        paths.append(args.train)
    elif not roles.probability_columns:
        raise InputError("predict needs either --train or probability_columns in the roles file")
    tables = ingest_tables(paths, roles, allow_empty=[True, False, False], require_label=[True, False, True])
    calib, test = tables[0], tables[1]
    spec = test.dataset.spec
    label_names = calib.dictionaries.get(roles.label_column, [])
    if args.kind == "classify":
        if args.train:
            model = fit_softmax_mlp(tables[2].dataset, replace(EXPERIMENT_MLP, seed=seed))
            cal_probs = model.predict_proba(calib.dataset)
            test_probs = model.predict_proba(test.dataset)
        else:
            cal_probs = external_scores(calib.probabilities).matrix
            test_probs = external_scores(test.probabilities).matrix
        L = test_probs.shape[1]
        if label_names and len(label_names) > L:
            raise InputError(f"{len(label_names)} labels seen but only {L} probability columns")
        cal_scores = aps_scores(cal_probs, record_uniforms(calib.dataset.ids, seed))
        test_scores = aps_scores(test_probs, record_uniforms(test.dataset.ids, seed))
        own = cal_scores[np.arange(calib.dataset.n), calib.dataset.labels] if calib.dataset.n else np.zeros(0)
        pool = CalibrationPool(own, calib.dataset.attributes, spec.level_counts, calib.dataset.labels, L)
        mask, extra = _classify_masks(args.method, pool, test_scores, test.dataset.attributes, args.alpha,
                                      args.test_level)
        names = list(label_names) + [str(y) for y in range(len(label_names), L)]
        for t in range(test.dataset.n):
            rec = {"row": t, "set": [names[y] for y in np.flatnonzero(mask[t])]}
            if extra is not None:
                rec["selected"] = [spec.attributes[k].name for k in extra.selected[t]]
                rec["per_placeholder"] = {names[y]: [spec.attributes[k].name for k in s]
                                          for y, s in extra.per_placeholder[t].items()}
            print(json.dumps(rec))
    else:
        if args.train:
            model = fit_oneclass(tables[2].dataset, replace(EXPERIMENT_ONECLASS, seed=seed))
            cal_scores = model.score(calib.dataset) if calib.dataset.n else np.zeros(0)
            test_scores = model.score(test.dataset)
        else:
            cal_scores = calib.probabilities[:, 0] if calib.dataset.n else np.zeros(0)
            test_scores = test.probabilities[:, 0]
        if calib.dataset.n and np.any(calib.dataset.labels != 0):
            raise InputError("outlier calibration data must contain inliers only (label code 0)")
        pool = CalibrationPool(cal_scores, calib.dataset.attributes, spec.level_counts)
        p, selected = _outlier_pvalues(args.method, pool, test_scores, test.dataset.attributes, args.alpha,
                                       args.test_level, args.max_picks)
        for t in range(test.dataset.n):
            rec = {"row": t, "pvalue": float(p[t]), "outlier": bool(p[t] <= args.alpha)}
            if selected is not None:
                rec["selected"] = [spec.attributes[k].name for k in selected[t]]
            print(json.dumps(rec))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afcp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a Monte Carlo experiment")
    run.add_argument("--config", required=True, help="JSON config path or bundled config name")
    run.add_argument("--seed", type=int)
    run.add_argument("--out", help="output directory")
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=cmd_run)

    gen = sub.add_parser("gen", help="write a synthetic dataset to CSV")
    gen.add_argument("--kind", choices=["medical", "outlier"], default="medical")
    gen.add_argument("--n", type=int, default=1000)
    gen.add_argument("--blue-prob", type=float, default=0.1)
    gen.add_argument("--name", default="data")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", help="output directory")
    gen.set_defaults(func=cmd_gen)

    pred = sub.add_parser("predict", help="one-shot calibration and prediction from CSV files")
    pred.add_argument("--calib", required=True)
    pred.add_argument("--test", required=True)
    pred.add_argument("--roles", required=True, help="JSON column-roles file")
    pred.add_argument("--train", help="training CSV for the built-in model")
    pred.add_argument("--kind", choices=["classify", "outlier"], default="classify")
    pred.add_argument("--method", default="afcp")
    pred.add_argument("--alpha", type=float, default=0.1)
    pred.add_argument("--test-level", type=float, default=0.05)
    pred.add_argument("--max-picks", type=int, default=1)
    pred.add_argument("--seed", type=int)
    pred.set_defaults(func=cmd_predict)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if getattr(args, "jobs", 1) < 1:
            raise InputError("--jobs must be at least 1")
        return args.func(args)
    except (InputError, jsonschema.ValidationError, OSError) as e:
        print(f"afcp: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
