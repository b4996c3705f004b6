import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpropkit.data_io import (
    MaxAbsScaler,
    RawRecord,
    add_bias_and_densify,
    gen_australian_like,
    gen_conjugate_quadratic,
    gen_logreg_synthetic,
    load_libsvm_dataset,
    parse_libsvm,
    serialize_libsvm,
    train_test_split,
)
from vpropkit.errors import ParseError
from vpropkit.evaluation import vi_exact_baseline
from vpropkit.models import Dataset
from vpropkit.numkit import cholesky_factor


def test_parse_single_line():
    recs, dim = parse_libsvm("+1 1:0.5 3:-2\n")
    assert dim == 3
    assert recs == [RawRecord(1.0, (1, 3), (0.5, -2.0))]


def test_parse_comments_blank_lines_and_label_encodings():
    text = "# header\n\n0 2:1\n1 1:3 # trailing\n-1\n+1 4:0.25\n"
    recs, dim = parse_libsvm(text)
    assert [r.label for r in recs] == [-1.0, 1.0, -1.0, 1.0]
    assert dim == 4
    assert recs[2].indices == ()


@pytest.mark.parametrize(
    "text, line",
    [
        ("+1 1:0.5\n+1 2:x\n", 2),
        ("+1 3:1 2:1\n", 1),
        ("+1 1:1 1:2\n", 1),
        ("\n\n2 1:1\n", 3),
        ("+1 0:1\n", 1),
        ("+1 1-0.5\n", 1),
        ("+1 1:nan\n", 1),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse_libsvm(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def _make_record(label, feats):
    items = sorted(feats.items())
    return RawRecord(label, tuple(i for i, _ in items), tuple(float(v) for _, v in items))


_record = st.builds(
    _make_record,
    st.sampled_from([-1.0, 1.0]),
    st.dictionaries(st.integers(1, 200), st.floats(-1e6, 1e6, allow_nan=False), max_size=8),
)


@settings(max_examples=100, deadline=None)
@given(records=st.lists(_record, min_size=1, max_size=10))
def test_serialize_roundtrip(records):
    again, dim = parse_libsvm(serialize_libsvm(records))
    assert again == records
    assert dim == max((r.indices[-1] for r in records if r.indices), default=0)


def test_densify_examples():
    recs = [RawRecord(1.0, (), ()), RawRecord(-1.0, (2, 3), (0.5, -1.0))]
    data = add_bias_and_densify(recs, 3)
    assert data.X.tolist() == [[0, 0, 0, 1], [0, 0.5, -1.0, 1]]
    assert data.y.tolist() == [1.0, -1.0]
    for r, row in zip(recs, data.X):
        assert np.count_nonzero(row) == len(r.indices) + 1


def test_split_examples():
    data = gen_logreg_synthetic(690, 3, 0)
    tr, te = train_test_split(data, 0.5, 7)
    assert tr.n == 345 and te.n == 345
    tr2, _ = train_test_split(data, 0.5, 7)
    assert np.array_equal(tr.X, tr2.X)
    rows = sorted(map(tuple, np.vstack([tr.X, te.X])))
    assert rows == sorted(map(tuple, data.X))
    assert train_test_split(gen_logreg_synthetic(7, 2, 0), 0.3, 0)[0].n == 2
    with pytest.raises(ValueError):
        train_test_split(gen_logreg_synthetic(3, 2, 0), 0.2, 0)
    with pytest.raises(ValueError):
        train_test_split(data, 1.0, 0)


def test_max_abs_scaler_uses_train_only():
    train = Dataset(np.array([[2.0, -4.0, 1.0], [-1.0, 2.0, 1.0]]), [1, -1])
    test = Dataset(np.array([[6.0, 1.0, 1.0]]), [1])
    sc = MaxAbsScaler.fit(train)
    assert np.abs(sc.transform(train).X).max(axis=0).tolist() == [1.0, 1.0, 1.0]
    assert sc.transform(test).X.tolist() == [[3.0, 0.25, 1.0]]


def _write(tmp_path, name, text):
    p = Path(tmp_path) / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_scaling_convention(tmp_path):
    text = "".join(f"{'+1' if i % 2 else '-1'} 1:{i} 2:{-2 * i}\n" for i in range(1, 11))
    raw_tr, _ = load_libsvm_dataset(_write(tmp_path, "toy", text), split=0.5, split_seed=0)
    assert np.abs(raw_tr.X).max() == 1.0
    sc_tr, _ = load_libsvm_dataset(_write(tmp_path, "toy_scale", text), split=0.5, split_seed=0)
    assert np.abs(sc_tr.X).max() > 1.0
    full, test = load_libsvm_dataset(_write(tmp_path, "toy_scale2", text), split=None)
    assert test is None and full.n == 10 and full.d == 3


def test_conjugate_generator():
    prob = gen_conjugate_quadratic(1, 0, 1.0)
    assert prob.H.shape == (1, 1)
    for d in (1, 3, 5):
        p = gen_conjugate_quadratic(d, d, 0.5)
        cholesky_factor(p.H)
        assert np.allclose((p.H + 0.5 * np.eye(d)) @ p.post_mean, -p.c)


def test_conjugate_forced_example():
    from vpropkit.data_io import make_conjugate_problem

    prob = make_conjugate_problem([[2.0]], [0.0], 1.0)
    assert prob.post_mean.tolist() == [0.0] and prob.post_prec.tolist() == [[3.0]]


def test_conjugate_matches_vi_exact():
    prob = gen_conjugate_quadratic(4, 1, 1.0, diagonal=True)
    st_, _ = vi_exact_baseline(prob.objective, 1.0, tol=1e-10)
    assert np.max(np.abs(st_.mu - prob.post_mean)) < 1e-6


def test_logreg_synthetic_generator():
    a, theta = gen_logreg_synthetic(4000, 3, 5, return_theta=True)
    b = gen_logreg_synthetic(4000, 3, 5)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert a.X.shape == (4000, 3) and np.all(np.isfinite(a.X))
    rate = np.mean(1.0 / (1.0 + np.exp(-(a.X @ theta))))
    assert abs(np.mean(a.y > 0) - rate) < 3 / math.sqrt(a.n)


def test_australian_like_shape():
    data = gen_australian_like(690, 0)
    assert data.X.shape == (690, 15)
    assert np.all(data.X[:, -1] == 1.0)
    assert np.all(np.abs(data.X[:, :-1]) <= 1.0)
    tr, _ = train_test_split(data, 0.5, 0)
    assert (tr.n, tr.d) == (345, 15)
    assert np.array_equal(gen_australian_like(690, 0).X, data.X)
