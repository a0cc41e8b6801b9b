"""Staged experiment runner.

Every stage reads and writes JSON/CSV artifacts inside one run directory,
``<out_dir>/<config hash>-s<seed>/``, so stages can be run and inspected one
at a time. Each artifact carries its format tag, the config hash and the
seed. Run directories are append-only: rewriting a file is allowed only if
the bytes are unchanged.
"""

import csv
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from sklearn.linear_model import LogisticRegression

from .behavior import BehaviorModel, cross_validate, encode_records
from .data import BehaviorRecord, CsvSchema, Dataset, Explanation, load_csv, split
from .exceptions import ContractError, MissingArtifactError, SchemaError, StageError
from .explainers import exact_shapley, lime_explain, rescale_max_abs
from .manipulation import ExplanationManipulator, ManipulationResult
from .metrics import FAIRNESS_ORDER, Undefined, fairness_diff, is_defined, mean_ci, permutation_test, reliance
from .models import RandomForestVoter, train_forest
from .simulation import (
    SimDM,
    adoption_probability,
    assign_tasks,
    assisted_decision,
    generate_logs,
    independent_decision,
    sample_population,
    shown_explanation,
)
from .targets import adversarial_target, combine, fit_combiner, weighted_vote_baseline
from .tasks import SUITES, make_task
from .validation import derive_rng, derive_seed

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = 1
STAGES = ("gen-data", "train-ai", "explain", "sim-log", "train-behavior", "manipulate", "evaluate", "report")
PRODUCERS = {
    "data.json": "gen-data",
    "ai_model.json": "train-ai",
    "explanations.json": "explain",
    "population.json": "sim-log",
    "behavior_logs.csv": "sim-log",
    "behavior_model.json": "train-behavior",
    "manipulations.json": "manipulate",
    "summary.json": "evaluate",
}
METRICS = ("accuracy", "overreliance", "underreliance", "fprd", "fnrd", "agreement", "adoption")


def _fmt(kind):
    return f"xainudge.{kind}/{ARTIFACT_VERSION}"


def _json_text(obj):
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _num(value):
    """JSON/CSV-safe number: undefined metrics become None."""
    if value is None or not is_defined(value):
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _majority(labels, tie):
    s = int(np.sum(labels))
    return 1 if s > 0 else -1 if s < 0 else tie


class Run:
    """One experiment run: a validated config, a seed, and its run directory."""

    def __init__(self, config, out_dir="runs", threads=1):
        self.config = config
        self.seed = config.seed
        self.hash = config.config_hash()
        self.threads = max(1, int(threads))
        self.dir = Path(out_dir) / f"{self.hash}-s{self.seed}"
        self._stage = None
        self._memo = {}

    # ---- artifact io ----

    def _header(self, kind):
        return {"format": _fmt(kind), "config_hash": self.hash, "seed": self.seed}

    def _put(self, name, text):
        path = self.dir / name
        if path.exists():
            if path.read_text() == text:
                return path
            raise StageError(self._stage, f"{path} already exists with different content; run directories are append-only")
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        tmp.replace(path)
        return path

    def write_json(self, name, kind, payload):
        return self._put(name, _json_text({**payload, **self._header(kind)}))

    def read_json(self, name, kind):
        if name in self._memo:
            return self._memo[name]
        path = self.dir / name
        if not path.exists():
            raise MissingArtifactError(path, PRODUCERS.get(name, "run"))
        d = json.loads(path.read_text())
        if d.get("format") != _fmt(kind):
            raise SchemaError(f"{path}: expected format {_fmt(kind)!r}, found {d.get('format')!r}")
        if d.get("config_hash") != self.hash or d.get("seed") != self.seed:
            raise SchemaError(f"{path} belongs to a different config or seed")
        self._memo[name] = d
        return d

    def write_csv(self, name, kind, header, rows):
        buf = io.StringIO()
        buf.write(f"# format={_fmt(kind)} config_hash={self.hash} seed={self.seed}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([_cell(v) for v in row] for row in rows)
        return self._put(name, buf.getvalue())

    def read_csv(self, name):
        path = self.dir / name
        if not path.exists():
            raise MissingArtifactError(path, PRODUCERS.get(name, "run"))
        with open(path, newline="") as fh:
            return list(csv.DictReader(line for line in fh if not line.startswith("#")))

    # ---- stage plumbing ----

    def run_stage(self, name):
        if name not in STAGES:
            raise ContractError(f"unknown stage {name!r}")
        self._stage = name
        logger.info("stage %s -> %s", name, self.dir)
        try:
            self.write_json("config.json", "config", {"config": self.config.model_dump(mode="json")})
            return getattr(self, "stage_" + name.replace("-", "_"))()
        except (StageError, MissingArtifactError):
            raise
        except Exception as exc:
            self._record_failure(name, exc)
            raise StageError(name, f"{type(exc).__name__}: {exc}") from exc

    def run_all(self):
        out = None
        for name in STAGES:
            out = self.run_stage(name)
        return out

    def _record_failure(self, stage, exc):
        self.dir.mkdir(parents=True, exist_ok=True)
        report = {**self._header("failure"), "stage": stage, "error": f"{type(exc).__name__}: {exc}"}
        (self.dir / "failure.json").write_text(_json_text(report))

    def _map(self, fn, items):
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                return list(pool.map(fn, items))
        return [fn(item) for item in items]

    # ---- shared loaders ----

    def _data(self):
        if "data" not in self._memo:
            d = self.read_json("data.json", "dataset-splits")
            ds = Dataset.from_dict(d["dataset"])
            index = {i: k for k, i in enumerate(ds.ids)}
            parts = {name: ds.subset([index[i] for i in ids]) for name, ids in d["splits"].items()}
            self._memo["data"] = (ds, parts)
        return self._memo["data"]

    def _ai(self):
        d = self.read_json("ai_model.json", "ai-model")
        labels = {i: int(v[0]) for i, v in d["predictions"].items()}
        return d, labels

    def _reference(self):
        ref = self._ai()[0]["reference_rule"]
        return np.asarray(ref["weights"]), np.asarray(ref["center"])

    def _population_kwargs(self, pop_cfg):
        kind = self.config.task.kind
        suite = SUITES.get(kind)
        return {
            "distortion_sd": pop_cfg.distortion_sd if pop_cfg.distortion_sd is not None
            else (suite.distortion_sd if suite else 0.5),
            "noise_sd": pop_cfg.noise_sd if pop_cfg.noise_sd is not None else (suite.noise_sd if suite else 0.3),
            "anchor_range": tuple(pop_cfg.anchor_range),
            "sensitivity_range": tuple(pop_cfg.sensitivity_range),
            "attention_k": pop_cfg.attention_k,
        }

    def _bank(self):
        d = self.read_json("explanations.json", "explanations")
        return {i: {k: np.asarray(v) for k, v in e.items()} for i, e in d["explanations"].items()}

    # ---- stages ----

    def stage_gen_data(self):
        cfg = self.config.task
        if cfg.kind == "csv":
            schema = CsvSchema.from_dict(cfg.csv.model_dump(exclude={"path"}))
            ds = load_csv(cfg.csv.path, schema)
        else:
            ds = make_task(cfg.kind, cfg.n_instances, seed=derive_seed(self.seed, "task"),
                           n=cfg.n_features, groups=cfg.groups)
        parts = split(ds, cfg.split, seed=derive_seed(self.seed, "split"))
        splits = dict(zip(("train", "calibration", "eval"), (list(p.ids) for p in parts)))
        self.write_json("data.json", "dataset-splits", {"dataset": ds.to_dict(), "splits": splits})
        which = {i: name for name, ids in splits.items() for i in ids}
        rows = [
            [ds.ids[k], which[ds.ids[k]], ds.groups[k], int(ds.y[k])] + [float(v) for v in ds.X[k]]
            for k in range(len(ds))
        ]
        self.write_csv("data.csv", "dataset", ["id", "split", "group", "label", *ds.feature_names], rows)
        return {name: len(ids) for name, ids in splits.items()}

    def stage_train_ai(self):
        cfg = self.config.ai_model
        ds, parts = self._data()
        train = parts["train"]
        model = train_forest(train, cfg.num_trees, cfg.max_depth, seed=derive_seed(self.seed, "forest"),
                             n_jobs=self.threads)
        prob = model.predict_proba(ds.X)[:, 1]
        labels = np.where(prob >= 0.5, 1, -1)
        predictions = {ds.ids[k]: [int(labels[k]), float(prob[k])] for k in range(len(ds))}
        accuracy = {
            name: float(np.mean([predictions[i][0] for i in p.ids] == p.y)) for name, p in parts.items()
        }
        self.write_json("ai_model.json", "ai-model", {
            "model": model.to_dict(),
            "predictions": predictions,
            "accuracy": accuracy,
            "reference_rule": self._fit_reference(ds, train),
        })
        self.write_csv("ai_predictions.csv", "ai-predictions", ["id", "ai_label", "p_positive"],
                       [[i, v[0], v[1]] for i, v in predictions.items()])
        return accuracy

    def _fit_reference(self, ds, train):
        # decision makers' rules are drawn around this linear rule
        if "true_weights" in ds.meta:
            w = np.asarray(ds.meta["true_weights"], dtype=np.float64)
            return {"weights": w.tolist(), "center": [float(ds.meta.get("center", 0.5))] * w.size,
                    "source": "generator"}
        lr = LogisticRegression().fit(train.X, train.y)
        w, b = lr.coef_[0], float(lr.intercept_[0])
        mean = train.X.mean(axis=0)
        norm2 = float(w @ w)
        # shift the training mean onto the decision boundary w . c + b = 0
        center = mean - (w @ mean + b) * w / norm2 if norm2 > 0 else mean
        return {"weights": w.tolist(), "center": center.tolist(), "source": "logistic-fit"}

    def stage_explain(self):
        cfg = self.config.explain
        ds, parts = self._data()
        if ds.n > 15:
            raise ContractError(f"exact Shapley needs n <= 15, dataset has n={ds.n}")
        model = RandomForestVoter.from_dict(self._ai()[0]["model"])
        background = parts["train"]
        targets = parts["calibration"].instances + parts["eval"].instances

        def one(inst):
            phi = exact_shapley(model, inst.features, background, cap=cfg.background_size).attributions
            lime, r2 = lime_explain(model, inst.features, background, cfg.lime_samples, cfg.lime_kernel_width,
                                    seed=derive_seed(self.seed, "lime", inst.id), return_score=True)
            return inst.id, phi.tolist(), lime.attributions.tolist(), r2

        out = self._map(one, targets)
        bank = {i: {"shapley": phi, "lime": lime} for i, phi, lime, _ in out}
        r2 = [r for *_, r in out]
        self.write_json("explanations.json", "explanations", {
            "explanations": bank,
            "lime_mean_r2": float(np.mean(r2)),
        })
        return len(bank)

    def stage_sim_log(self):
        cfg = self.config.sim_log
        bank = self._bank()
        ds, parts = self._data()
        _, ai_labels = self._ai()
        weights, center = self._reference()
        population = sample_population(cfg.participants, weights, seed=derive_seed(self.seed, "log-population"),
                                       center=center, prefix="log", **self._population_kwargs(cfg.population))
        logs = generate_logs(population, parts["calibration"], ai_labels, bank, dict(cfg.mix),
                             seed=derive_seed(self.seed, "log"), tasks_per_dm=cfg.tasks_per_participant,
                             augment_params=self.config.explain.augment.model_dump(), threads=self.threads)
        self.write_json("population.json", "population", {"decision_makers": [dm.to_dict() for dm in population]})
        n = ds.n
        rows = [
            [r.participant, r.instance.id, r.explanation.kind, r.ai_label, r.human_label]
            + [float(v) for v in r.explanation.attributions]
            for r in logs
        ]
        header = ["participant", "instance_id", "explanation_kind", "ai_label", "human_label"]
        self.write_csv("behavior_logs.csv", "behavior-logs", header + [f"e{j}" for j in range(n)], rows)
        return len(logs)

    def load_logs(self):
        """Behavior records from ``behavior_logs.csv`` joined with the dataset by instance id."""
        rows = self.read_csv("behavior_logs.csv")
        ds, _ = self._data()
        index = {i: k for k, i in enumerate(ds.ids)}
        records = []
        for row in rows:
            if row["instance_id"] not in index:
                raise SchemaError(f"behavior log refers to unknown instance {row['instance_id']!r}")
            inst = ds.instance(index[row["instance_id"]])
            e = np.array([float(row[f"e{j}"]) for j in range(ds.n)])
            records.append(BehaviorRecord(inst, int(row["ai_label"]), Explanation(e, row["explanation_kind"]),
                                          int(row["human_label"]), row["participant"]))
        return records

    def stage_train_behavior(self):
        cfg = self.config.behavior
        records = self.load_logs()
        Z, y = encode_records(records)
        model = BehaviorModel(**cfg.train_kwargs(), seed=derive_seed(self.seed, "behavior")).fit(Z, y)
        cv = None
        if cfg.cv_folds >= 2:
            subset = records
            if cfg.cv_records is not None and cfg.cv_records < len(records):
                pick = np.sort(derive_rng(self.seed, "cv-subsample").choice(len(records), cfg.cv_records, replace=False))
                subset = [records[k] for k in pick]
            mean, folds = cross_validate(subset, cfg.cv_folds, seed=derive_seed(self.seed, "cv"), **cfg.train_kwargs())
            cv = {"folds": cfg.cv_folds, "records": len(subset), "mean_accuracy": mean, "fold_accuracies": folds}
        self.write_json("behavior_model.json", "behavior", {
            "model": model.to_dict(),
            "loss_curve": [float(v) for v in model.loss_curve_],
            "n_steps": int(model.n_steps_),
            "records": len(records),
            "cv": cv,
        })
        return cv

    def _benign_targets(self, ds, parts, ai_labels):
        cfg = self.config.manipulation
        dms = [SimDM.from_dict(d) for d in self.read_json("population.json", "population")["decision_makers"]]
        panel = dms[: cfg.panel_size]

        def panel_label(inst):
            votes = [independent_decision(dm, inst.features, inst.id) for dm in panel]
            return _majority(votes, tie=ai_labels[inst.id])

        calib, ev = parts["calibration"].instances, parts["eval"].instances
        calib_panel = [panel_label(i) for i in calib]
        eval_panel = [panel_label(i) for i in ev]
        cm = fit_combiner([(i.label, h, ai_labels[i.id]) for i, h in zip(calib, calib_panel)], cfg.combiner_alpha)
        targets = [combine(cm, h, ai_labels[i.id]) for i, h in zip(ev, eval_panel)]

        def acc(pred, insts):
            return float(np.mean([p == i.label for p, i in zip(pred, insts)]))

        clip = lambda a: min(max(a, 1e-3), 1 - 1e-3)  # noqa: E731
        human_acc, model_acc = acc(calib_panel, calib), acc([ai_labels[i.id] for i in calib], calib)
        vote = [weighted_vote_baseline(h, ai_labels[i.id], clip(human_acc), clip(model_acc))
                for i, h in zip(ev, eval_panel)]
        info = {
            "panel_size": len(panel),
            "combiner": cm.to_dict(),
            "eval_accuracy": {
                "ai": acc([ai_labels[i.id] for i in ev], ev),
                "panel": acc(eval_panel, ev),
                "combined": acc(targets, ev),
                "weighted_vote": acc(vote, ev),
            },
        }
        return targets, info

    def stage_manipulate(self):
        cfg = self.config.manipulation
        # nearest upstream first, so a missing input names the stage to run next
        behavior = BehaviorModel.from_dict(self.read_json("behavior_model.json", "behavior")["model"])
        ds, parts = self._data()
        _, ai_labels = self._ai()
        ev = parts["eval"]
        if cfg.mode == "adversarial":
            targets = [adversarial_target(inst, ds.task_kind, cfg.target_map) for inst in ev.instances]
            benign = None
        else:
            targets, benign = self._benign_targets(ds, parts, ai_labels)
        manipulator = ExplanationManipulator(behavior, seed=derive_seed(self.seed, "manipulate"), n_jobs=self.threads,
                                             **cfg.optimizer_kwargs())
        y_m = [ai_labels[i] for i in ev.ids]
        results = manipulator.manipulate_all(ev.X, y_m, targets, keys=ev.ids)
        stats = {
            "instances": len(results),
            "feasible_fraction": float(np.mean([r.feasible for r in results])),
            "converged_fraction": float(np.mean([any(r.converged) for r in results])),
            "mean_final_loss": float(np.mean([r.final_behavior_loss for r in results])),
        }
        self.write_json("manipulations.json", "manipulations", {
            "mode": cfg.mode,
            "targets": dict(zip(ev.ids, targets)),
            "results": {i: r.to_dict() for i, r in zip(ev.ids, results)},
            "stats": stats,
            "benign": benign,
        })
        return stats

    def _group_order(self, ds):
        if self.config.evaluation.group_order is not None:
            return tuple(self.config.evaluation.group_order)
        if ds.task_kind in FAIRNESS_ORDER:
            return FAIRNESS_ORDER[ds.task_kind]
        return tuple(ds.group_vocab[:2])

    def stage_evaluate(self):
        cfg = self.config.evaluation
        manipulated = None
        if "manipulated" in cfg.conditions:
            doc = self.read_json("manipulations.json", "manipulations")
            manipulated = {i: ManipulationResult.from_dict(r).explanation for i, r in doc["results"].items()}
        ds, parts = self._data()
        ev = parts["eval"]
        ai_doc, ai_labels = self._ai()
        bank = self._bank()
        weights, center = self._reference()
        order = self._group_order(ds)
        pop_cfg = cfg.population or self.config.sim_log.population
        augment_params = self.config.explain.augment.model_dump()
        task_seed = derive_seed(self.seed, "eval-tasks")
        instances = ev.instances

        def shown(cond, dm, inst):
            if cond == "manipulated":
                return manipulated[inst.id]
            return shown_explanation(bank, inst.id, cond, derive_seed(self.seed, "eval-explain"), dm.name,
                                     augment_params)

        def participant(args):
            cond, dm = args
            rows = []
            for k in assign_tasks(dm, ev, cfg.tasks_per_participant, task_seed):
                inst = instances[k]
                e = shown(cond, dm, inst)
                y_m = ai_labels[inst.id]
                y_h = assisted_decision(dm, inst.features, y_m, e, inst.id)
                rows.append((inst.id, inst.group, inst.label, y_m, y_h, adoption_probability(dm, e)))
            y = np.array([r[2] for r in rows])
            ym = np.array([r[3] for r in rows])
            yh = np.array([r[4] for r in rows])
            rel = reliance(y, ym, yh)
            fprd, fnrd = fairness_diff(y, yh, np.array([r[1] for r in rows]), order=order)
            metrics = {
                "accuracy": rel.accuracy,
                "overreliance": rel.overreliance,
                "underreliance": rel.underreliance,
                "fprd": fprd,
                "fnrd": fnrd,
                "agreement": float(np.mean(yh == ym)),
                "adoption": float(np.mean([r[5] for r in rows])),
            }
            return cond, dm.name, rows, metrics

        jobs = []
        for cond in cfg.conditions:
            population = sample_population(cfg.participants, weights, seed=derive_seed(self.seed, "eval-population", cond),
                                           center=center, prefix=f"eval-{cond}", **self._population_kwargs(pop_cfg))
            jobs.extend((cond, dm) for dm in population)
        results = self._map(participant, jobs)

        per_participant = [
            [name, cond, len(rows)] + [_num(m[k]) for k in METRICS] for cond, name, rows, m in results
        ]
        self.write_csv("participants.csv", "participants", ["participant", "condition", "tasks", *METRICS],
                       per_participant)
        decisions = [
            [name, cond, *row[:5]] for cond, name, rows, _ in results for row in rows
        ]
        self.write_csv("decisions.csv", "decisions",
                       ["participant", "condition", "instance_id", "group", "label", "ai_label", "human_label"],
                       decisions)

        by_cond = {c: [m for cond, _, _, m in results if cond == c] for c in cfg.conditions}
        conditions = {}
        for c, ms in by_cond.items():
            pooled_rows = [row for cond, _, rows, _ in results if cond == c for row in rows]
            y = np.array([r[2] for r in pooled_rows])
            ym = np.array([r[3] for r in pooled_rows])
            yh = np.array([r[4] for r in pooled_rows])
            rel = reliance(y, ym, yh)
            fprd, fnrd = fairness_diff(y, yh, np.array([r[1] for r in pooled_rows]), order=order)
            conditions[c] = {
                "participants": len(ms),
                "metrics": {k: mean_ci([m[k] for m in ms]) for k in METRICS},
                "pooled": {"accuracy": rel.accuracy, "overreliance": _num(rel.overreliance),
                           "underreliance": _num(rel.underreliance), "fprd": _num(fprd), "fnrd": _num(fnrd)},
            }
        tests = {}
        if "manipulated" in by_cond:
            for other in cfg.conditions:
                if other == "manipulated":
                    continue
                tests[f"manipulated_vs_{other}"] = {
                    k: self._compare(by_cond["manipulated"], by_cond[other], k, other) for k in METRICS
                }
        summary = {
            "task_kind": ds.task_kind,
            "group_order": list(order),
            "mode": self.config.manipulation.mode,
            "ai_accuracy": ai_doc["accuracy"],
            "conditions": conditions,
            "tests": tests,
        }
        for name, kind, key in (("behavior_model.json", "behavior", "cv"), ("manipulations.json", "manipulations", "stats"),
                                ("manipulations.json", "manipulations", "benign")):
            if (self.dir / name).exists():
                summary[{"cv": "behavior_cv", "stats": "manipulation", "benign": "benign"}[key]] = \
                    self.read_json(name, kind)[key]
        self.write_json("summary.json", "summary", summary)
        return summary

    def _compare(self, a_metrics, b_metrics, key, other):
        a = [float(m[key]) for m in a_metrics if is_defined(m[key])]
        b = [float(m[key]) for m in b_metrics if is_defined(m[key])]
        if not a or not b:
            return {"difference": None, "p_value": None, "reason": "no defined values in one condition"}
        p = permutation_test(a, b, self.config.evaluation.num_perms, seed=derive_seed(self.seed, "perm", other, key))
        return {"difference": float(np.mean(a) - np.mean(b)), "p_value": p}

    def stage_report(self):
        summary = self.read_json("summary.json", "summary")
        rows = []
        for cond, block in sorted(summary["conditions"].items()):
            for metric, stats in sorted(block["metrics"].items()):
                rows.append([cond, metric, stats["mean"], stats["ci_low"], stats["ci_high"], stats["n"]])
        self.write_csv("metrics_long.csv", "metrics-long", ["condition", "metric", "mean", "ci_low", "ci_high", "n"],
                       rows)
        return format_summary(summary)


def _fmt_ci(stats):
    if stats["mean"] is None:
        return "undefined"
    return f"{stats['mean']:+.3f} [{stats['ci_low']:+.3f}, {stats['ci_high']:+.3f}]"


def format_summary(summary):
    """Plain-text table of per-condition means with 95% intervals and test p-values."""
    shown = ("accuracy", "overreliance", "underreliance", "fprd", "fnrd")
    lines = [f"task={summary['task_kind']} mode={summary['mode']} group order={'-'.join(summary['group_order'])}"]
    width = 28
    lines.append("condition".ljust(14) + "".join(m.ljust(width) for m in shown))
    for cond, block in summary["conditions"].items():
        lines.append(cond.ljust(14) + "".join(_fmt_ci(block["metrics"][m]).ljust(width) for m in shown))
    for name, block in summary["tests"].items():
        cells = []
        for m in shown:
            p = block[m]["p_value"]
            cells.append(("p=n/a" if p is None else f"p={p:.4f}").ljust(width))
        lines.append(name.ljust(14) if len(name) < 14 else name)
        lines.append(" " * 14 + "".join(cells))
    if summary.get("manipulation"):
        st = summary["manipulation"]
        lines.append(f"manipulation: feasible {st['feasible_fraction']:.3f}, mean final loss {st['mean_final_loss']:.3f}")
    if summary.get("behavior_cv"):
        lines.append(f"behavior model {summary['behavior_cv']['folds']}-fold CV accuracy "
                     f"{summary['behavior_cv']['mean_accuracy']:.3f}")
    if summary.get("benign"):
        acc = summary["benign"]["eval_accuracy"]
        lines.append("benign targets accuracy: " + ", ".join(f"{k} {v:.3f}" for k, v in sorted(acc.items())))
    return "\n".join(lines)


def run_experiment(config, out_dir="runs", threads=1):
    """Execute every stage and return the run directory."""
    run = Run(config, out_dir, threads)
    run.run_all()
    return run.dir
