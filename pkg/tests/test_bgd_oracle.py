"""Bit-level oracle for the iteration-keyed aggregate evaluator.

A plain Python gradient-descent loop re-implements the training template's
arithmetic (same fold order: contributions sorted before summing, update as
P - ((lr*G)/N)). Every model row of every iteration must match exactly, which
pins down the per-iteration scheduling: round j's aggregates see exactly
round j's facts.
"""
import math
import random

from llib.engine import run_program
from llib.library import new_function
from llib.relation import ColumnType, Relation, Schema

INT = ColumnType.INTEGER
DBL = ColumnType.DOUBLE


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _bgd_loop(rows, lr, iterations, init, logistic):
    """rows: (id, feature, value, label). Returns model[j][feature]."""
    ids = sorted({r[0] for r in rows})
    features = sorted({r[1] for r in rows})
    n = len(ids)
    value = {(r[0], r[1]): r[2] for r in rows}
    label = {r[0]: r[3] for r in rows}
    model = {0: {c: init for c in features}}
    for j in range(iterations):
        params = model[j]
        # predict(j, id) = sum over features (sorted) of v * p
        predicted = {}
        for pid in ids:
            acc = None
            for c in features:
                if (pid, c) not in value:
                    continue
                y0 = value[(pid, c)] * params[c]
                acc = y0 if acc is None else acc + y0
            predicted[pid] = acc
        # gradient(j, c) = sum over ids (sorted) of the per-row term
        gradient = {}
        for c in features:
            acc = None
            for pid in ids:
                if (pid, c) not in value:
                    continue
                yp = predicted[pid]
                if logistic:
                    g0 = (_sigmoid(yp) - label[pid]) * value[(pid, c)]
                else:
                    g0 = 2.0 * (yp - label[pid]) * value[(pid, c)]
                acc = g0 if acc is None else acc + g0
            gradient[c] = acc
        model[j + 1] = {c: params[c] - ((lr * gradient[c]) / n)
                        for c in features}
    return model


def _train_rows(seed, n_points, n_features):
    rng = random.Random(seed)
    rows = []
    for pid in range(1, n_points + 1):
        xs = [rng.uniform(-1.0, 1.0) for _ in range(n_features)]
        y = sum((k + 1) * x for k, x in enumerate(xs)) + rng.uniform(-0.1, 0.1)
        for c, x in enumerate(xs, start=1):
            rows.append((pid, c, x, y))
    return rows


def _engine_models(fn_name, rows, lr, iterations, init):
    fn = new_function(fn_name).set_direction(IdCol="Id", CCol="C", VCol="V",
                                             YCol="Y")
    fn.set_param("lr", lr).set_param("iterations", iterations)
    fn.set_param("init", init)
    vtrain = Relation.from_rows(
        Schema([("Id", INT), ("C", INT), ("V", DBL), ("Y", DBL)]), rows)
    full = run_program(fn.program_text(), {"vtrain": vtrain})
    models: dict[int, dict[int, float]] = {}
    for j, c, p in full.database["model"].rows:
        models.setdefault(j, {})[c] = p
    return models


def test_linear_training_matches_python_loop_exactly():
    for seed, n_points, n_features, iterations in (
            (1, 6, 1, 40), (2, 8, 2, 30), (3, 10, 3, 25)):
        rows = _train_rows(seed, n_points, n_features)
        got = _engine_models("LinRegBGD", rows, lr=0.05,
                             iterations=iterations, init=0.01)
        want = _bgd_loop(rows, lr=0.05, iterations=iterations, init=0.01,
                         logistic=False)
        assert set(got) == set(range(iterations + 1))
        for j in got:
            assert got[j] == want[j], f"seed {seed}, iteration {j}"


def test_logistic_training_matches_python_loop_exactly():
    rng = random.Random(4)
    rows = []
    for pid in range(1, 13):
        x = rng.uniform(0.3, 1.5) * (1 if pid % 2 else -1)
        rows.append((pid, 1, x, 1.0 if x > 0 else 0.0))
        rows.append((pid, 2, 1.0, 1.0 if x > 0 else 0.0))
    got = _engine_models("LogRegBGD", rows, lr=0.3, iterations=35, init=0.01)
    want = _bgd_loop(rows, lr=0.3, iterations=35, init=0.01, logistic=True)
    for j in got:
        assert got[j] == want[j], f"iteration {j}"


def test_bgd_naive_evaluation_matches_seminaive():
    rows = _train_rows(7, 8, 2)
    fn = new_function("LinRegBGD").set_direction(IdCol="Id", CCol="C",
                                                 VCol="V", YCol="Y")
    fn.set_param("lr", 0.05).set_param("iterations", 20)
    vtrain = Relation.from_rows(
        Schema([("Id", INT), ("C", INT), ("V", DBL), ("Y", DBL)]), rows)
    fast = run_program(fn.program_text(), {"vtrain": vtrain})
    slow = run_program(fn.program_text(), {"vtrain": vtrain}, naive=True)
    for pred in ("model", "gradient", "predict", "trained"):
        assert fast.database[pred] == slow.database[pred], pred
