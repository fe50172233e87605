"""Symbolic-regression targets, sampling, metrics, and data poisoning."""

import numpy as np
import pytest
import sympy

from adaptkan.tasks import (
    TASKS,
    PoisonPlan,
    generate,
    get_task,
    load_dataset,
    poison,
    poison_hook,
    rmse,
    save_dataset,
)

# independent route for every formula (different library, different
# expression source) for the two-expression rule
_a, _b = sympy.symbols("a b")
SYMPY_FORMS = {
    "II.38.3": _a * _b,
    "I.6.2": sympy.exp(-(_a**2) / (2 * _b**2)) / sympy.sqrt(2 * sympy.pi * _b**2),
    "I.16.6": (_a + _b) / (1 + _a * _b),
    "I.40.1": _a * sympy.exp(-_b),
    "II.2.42": (_a - 1) * _b,
    "I.12.11": 1 / (1 + _a * sympy.sin(_b)),
}


def sympy_eval(name, X):
    f = sympy.lambdify((_a, _b), SYMPY_FORMS[name], "numpy")
    return f(X[:, 0], X[:, 1])


def test_point_values():
    assert get_task("II.38.3").fn(np.array([[0.5, 2.0]]))[0] == pytest.approx(1.0)
    got = get_task("I.6.2").fn(np.array([[0.0, 1.0]]))[0]
    assert got == pytest.approx(1 / np.sqrt(2 * np.pi), abs=1e-7)


@pytest.mark.parametrize("name", sorted(TASKS))
def test_formulas_match_independent_implementation(name):
    task = get_task(name)
    rng = np.random.default_rng(123)
    lo = np.array([r[0] for r in task.ranges])
    hi = np.array([r[1] for r in task.ranges])
    X = rng.uniform(lo, hi, size=(100, task.arity))
    np.testing.assert_allclose(task.fn(X), sympy_eval(name, X), rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("name", sorted(TASKS))
def test_generated_inputs_inside_ranges(name):
    task = get_task(name)
    (X_tr, y_tr), (X_te, y_te) = generate(task, seed=5)
    for X in (X_tr, X_te):
        for j, (lo, hi) in enumerate(task.ranges):
            assert X[:, j].min() >= lo and X[:, j].max() <= hi
    assert np.isfinite(y_tr).all() and np.isfinite(y_te).all()
    assert len(X_tr) == task.train_n and len(X_te) == task.test_n


def test_generate_deterministic_and_disjoint():
    task = get_task("II.38.3")
    (Xa, ya), (Ta, _) = generate(task, seed=9)
    (Xb, yb), (Tb, _) = generate(task, seed=9)
    np.testing.assert_array_equal(Xa, Xb)
    np.testing.assert_array_equal(ya, yb)
    np.testing.assert_array_equal(Ta, Tb)
    # train and test come from one sample without replacement
    both = np.vstack([Xa, Ta])
    assert len(np.unique(both, axis=0)) == len(both)


def test_unknown_task_raises():
    with pytest.raises(KeyError):
        get_task("I.999")


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([3.0, 4.0], [1.0, 2.0]) == 2.0
    assert rmse([0.0, 2.0], [0.0, 0.0]) == pytest.approx(np.sqrt(2), abs=1e-12)


def test_poison_plan_epoch_selection():
    plan = PoisonPlan(epochs=1000, seed=3)
    assert len(plan.scales) == 10
    ups = [e for e, s in plan.scales.items() if s == 10.0]
    downs = [e for e, s in plan.scales.items() if s == 0.1]
    assert len(ups) == 5 and len(downs) == 5
    assert all(0 <= e < 1000 for e in plan.scales)
    plan2 = PoisonPlan(epochs=1000, seed=3)
    assert plan.scales == plan2.scales


def test_poison_zero_epochs_is_identity():
    plan = PoisonPlan(epochs=100, n_up=0, n_down=0, seed=0)
    hook = poison_hook(plan)
    X = np.ones((4, 2))
    y = np.arange(4.0)
    X2, y2 = hook(7, X, y)
    assert X2 is X and y2 is y


def test_poison_replaces_inputs_keeps_labels():
    plan = PoisonPlan(epochs=10, n_up=1, n_down=0, scale_up=10.0, seed=1)
    hook = poison_hook(plan)
    bad_epoch = next(iter(plan.scales))
    X = np.zeros((64, 3))
    y = np.arange(64.0)
    X2, y2 = hook(bad_epoch, X, y)
    assert y2 is y
    assert X2.shape == X.shape
    # scaled standard normal: spread far beyond the zero inputs
    assert X2.std() > 5.0


def test_poison_stream_determinism():
    def stream():
        rngs = np.random.default_rng(0)
        for e in range(20):
            yield e, rngs.normal(size=(8, 2)), np.zeros(8)

    plan = PoisonPlan(epochs=20, n_up=2, n_down=2, seed=4)
    out1 = [(e, X.copy()) for e, X, _ in poison(stream(), plan)]
    out2 = [(e, X.copy()) for e, X, _ in poison(stream(), plan)]
    for (e1, X1), (e2, X2) in zip(out1, out2):
        assert e1 == e2
        np.testing.assert_array_equal(X1, X2)


def test_dataset_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    X = rng.normal(size=(25, 3))
    y = rng.normal(size=25)
    path = tmp_path / "data.csv"
    save_dataset(path, X, y)
    X2, y2 = load_dataset(path)
    np.testing.assert_array_equal(X, X2)
    np.testing.assert_array_equal(y, y2)
    header = path.read_text().splitlines()[0]
    assert header == "x0,x1,x2,target"
