import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from catso.environments import (
    DatasetSpec,
    RevealSession,
    load_csv,
    make_nonstationary,
    next_session,
    round_half_up,
    split_known,
    synth_skills,
    write_csv,
)
from catso.errors import (
    BudgetError,
    MissingFileError,
    NonNumericCellError,
    RaggedRowError,
    SchemaError,
    SessionStateError,
    UnknownLabelError,
)
from catso.feature_attention import FeatureGroupSchema

from conftest import make_linear_dataset


@pytest.fixture
def csv_file(tmp_path):
    def write(text, name="d.csv"):
        p = tmp_path / name
        p.write_text(text)
        return p

    return write


# -- loading ------------------------------------------------------------------------


def test_load_normalizes_and_maps_labels(csv_file):
    p = csv_file("a,b,y\n1,5,high\n3,5,low\n2,5,high\n")
    ds = load_csv(p, "y")
    np.testing.assert_allclose(ds.features[:, 0], [0.0, 1.0, 0.5])
    np.testing.assert_array_equal(ds.features[:, 1], [0.0, 0.0, 0.0])
    assert ds.class_names == ("high", "low")
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.schema.observed == () and ds.schema.n_groups == 2


def test_load_two_row_constant_column(csv_file):
    ds = load_csv(csv_file("c,x,y\n7,0,0\n7,1,1\n"), "y")
    assert ds.features[:, 0].tolist() == [0.0, 0.0]
    assert ds.n_events == 2 and ds.n_features == 2 and ds.n_classes == 2


def test_numeric_labels_order_numerically(csv_file):
    ds = load_csv(csv_file("x,y\n0,10\n1,2\n2,1\n"), "y")
    assert ds.class_names == ("1", "2", "10")
    assert ds.labels.tolist() == [2, 1, 0]


def test_load_errors(csv_file, tmp_path):
    with pytest.raises(MissingFileError):
        load_csv(tmp_path / "nope.csv", "y")
    with pytest.raises(RaggedRowError):
        load_csv(csv_file("a,y\n1,0\n2\n"), "y")
    with pytest.raises(NonNumericCellError):
        load_csv(csv_file("a,y\nabc,0\n2,1\n"), "y")
    with pytest.raises(NonNumericCellError):
        load_csv(csv_file("a,y\nnan,0\n2,1\n"), "y")
    with pytest.raises(UnknownLabelError):
        load_csv(csv_file("a,y\n1,0\n2,3\n"), "y", DatasetSpec(labels=["0", "1"]))
    with pytest.raises(UnknownLabelError):
        load_csv(csv_file("a,y\n1,0\n2,0\n"), "y")
    with pytest.raises(SchemaError):
        load_csv(csv_file("a,y\n1,0\n2,1\n"), "label")
    with pytest.raises(SchemaError):
        load_csv(csv_file("a,y\n1,0\n2,1\n"), "y", DatasetSpec(n_features=3))


def test_load_with_group_file(csv_file, tmp_path):
    p = csv_file("q,s1a,s1b,s2,y\n0,1,0,1,a\n1,0,1,0,b\n")
    (tmp_path / "d.groups").write_text("observed: 0\nskill1: 1-2\nskill2: 3\n")
    ds = load_csv(p, "y", DatasetSpec(groups_path=tmp_path / "d.groups", n_classes=2))
    assert ds.schema.observed == (0,)
    assert ds.schema.groups == ((1, 2), (3,))


def test_write_then_load_roundtrip(tmp_path):
    ds = synth_skills(50, 3, [2, 3, 1], 4, seed=1)
    path = write_csv(ds, tmp_path / "s.csv")
    back = load_csv(path, "label", DatasetSpec(groups_path=path.with_suffix(".groups")))
    assert back.schema == ds.schema
    assert back.class_names == ds.class_names
    np.testing.assert_array_equal(back.labels, ds.labels)
    # features were already in [0, 1]; columns spanning [0, 1] come back unchanged
    full = (ds.features.min(0) == 0) & (ds.features.max(0) == 1)
    np.testing.assert_allclose(back.features[:, full], ds.features[:, full])


# -- known/unknown split ------------------------------------------------------


def test_round_half_up():
    assert round_half_up(9.3) == 9
    assert round_half_up(2.5) == 3
    assert round_half_up(0.35 * 10) == 4


def test_split_known_sizes_and_determinism():
    ds = make_linear_dataset(T=5, N=93)
    s = split_known(ds, 0.1, seed=3)
    assert len(s.observed) == 9 and s.n_groups == 84 and s.is_singleton
    assert split_known(ds, 0.1, seed=3) == s
    assert split_known(ds, 0.1, seed=4) != s
    assert split_known(ds, 0.0, seed=3).n_groups == 93
    with pytest.raises(ValueError):
        split_known(ds, 1.0, seed=0)


# -- nonstationarity -----------------------------------------------------------------


def _split(ds, seed=0):
    return ds.with_schema(split_known(ds, 0.3, seed))


def test_nonstationary_keeps_observed_columns():
    ds = _split(make_linear_dataset(T=500, N=10))
    out = make_nonstationary(ds, seed=1)
    obs = list(ds.schema.observed)
    np.testing.assert_array_equal(out.features[:, obs], ds.features[:, obs])
    assert make_nonstationary(ds, seed=1).features.tobytes() == out.features.tobytes()


def test_nonstationary_never_invents_pairs():
    ds = _split(make_linear_dataset(T=300, N=8))
    out = make_nonstationary(ds, seed=2)
    unknown = [i for i in range(8) if i not in ds.schema.observed]
    pairs = {tuple(r) + (y,) for r, y in zip(ds.features[:, unknown].tolist(), ds.labels.tolist())}
    for r, y in zip(out.features[:, unknown].tolist(), out.labels.tolist()):
        assert tuple(r) + (y,) in pairs


def test_nonstationary_replacement_ramp():
    T = 10_000
    ds = _split(make_linear_dataset(T=T, N=6))
    rates = []
    for seed in range(3):
        out = make_nonstationary(ds, seed=seed)
        unknown = [i for i in range(6) if i not in ds.schema.observed]
        replaced = np.any(out.features[:, unknown] != ds.features[:, unknown], axis=1)
        rates.append(replaced[: T // 10].mean())
        assert replaced[-1]  # t = T is always replaced (unless it drew itself)
    # first decile: mean probability (t/T) is ~0.05
    assert all(abs(r - 0.05) <= 0.02 for r in rates)


# -- synthetic skills --------------------------------------------------------------


def test_synth_skills_reference_sizes():
    sizes = (181, 9, 4, 7, 6, 27, 110, 297, 30)
    ds = synth_skills(200, 9, sizes, 50, seed=0)
    assert ds.n_features == 721
    assert ds.schema.observed == tuple(range(50))
    assert [len(g) for g in ds.schema.groups] == list(sizes)
    assert ds.features.min() >= 0 and ds.features.max() <= 1


def test_synth_skills_minimal_and_deterministic():
    ds = synth_skills(30, 2, (1, 1), 1, seed=4)
    assert ds.n_features == 3 and ds.n_classes == 2
    again = synth_skills(30, 2, (1, 1), 1, seed=4)
    assert ds.features.tobytes() == again.features.tobytes()
    assert ds.labels.tobytes() == again.labels.tobytes()


@pytest.mark.parametrize("args", [(10, 2, (1,), 1), (10, 2, (1, 0), 1), (10, 1, (3,), 1), (10, 2, (1, 1), 0)])
def test_synth_skills_rejects_bad_sizes(args):
    with pytest.raises(ValueError):
        synth_skills(*args, seed=0)


def test_synth_confidence_tracks_label():
    ds = synth_skills(2000, 3, (3, 3, 3), 5, seed=0)
    for g, cols in enumerate(ds.schema.groups):
        conf = ds.features[:, cols[0]]
        assert conf[ds.labels == g].mean() > conf[ds.labels != g].mean() + 0.2


# -- sessions ---------------------------------------------------------------------


def _session(budget=2, label=3):
    schema = FeatureGroupSchema(6, (0,), ((1, 2), (3,), (4, 5)))
    row = np.arange(6, dtype=float) / 10
    return RevealSession(0, row, label, schema, budget)


def test_commit_rewards():
    assert _session(label=3).commit_arm(3) == 1
    assert _session(label=3).commit_arm(1) == 0


def test_reveal_values_and_budget():
    s = _session(budget=2)
    np.testing.assert_array_equal(s.observed_values, [0.0])
    np.testing.assert_array_equal(s.reveal(0), [0.1, 0.2])
    s.reveal(2)
    np.testing.assert_array_equal(s.reveal(0), [0.1, 0.2])  # cached, not charged
    with pytest.raises(BudgetError):
        s.reveal(1)
    with pytest.raises(IndexError):
        s.reveal(7)


def test_revealed_values_are_immutable():
    s = _session()
    vals = s.reveal(0)
    with pytest.raises(ValueError):
        vals[0] = 9.0
    with pytest.raises(ValueError):
        s.observed_values[0] = 9.0


def test_session_state_errors():
    s = _session()
    s.commit_arm(0)
    with pytest.raises(SessionStateError):
        s.commit_arm(0)
    with pytest.raises(SessionStateError):
        s.reveal(0)


def test_next_session_follows_order():
    ds = make_linear_dataset(T=5, N=4)
    s = next_session(ds, [4, 3, 2, 1, 0], 1, budget=0)
    np.testing.assert_array_equal(s.observed_values, ds.features[3, list(ds.schema.observed)])
    assert s.commit_arm(ds.labels[3]) == 1


@settings(max_examples=100, deadline=None)
@given(
    budget=st.integers(0, 3),
    actions=st.lists(
        st.one_of(st.tuples(st.just("reveal"), st.integers(0, 2)), st.tuples(st.just("commit"), st.integers(0, 4))),
        max_size=12,
    ),
)
def test_adversarial_sessions_never_leak(budget, actions):
    s = _session(budget=budget)
    seen = set()
    committed = False
    for kind, arg in actions:
        if kind == "reveal":
            if committed:
                with pytest.raises(SessionStateError):
                    s.reveal(arg)
            elif arg not in seen and len(seen) >= budget:
                with pytest.raises(BudgetError):
                    s.reveal(arg)
            else:
                s.reveal(arg)
                seen.add(arg)
        else:
            if committed:
                with pytest.raises(SessionStateError):
                    s.commit_arm(arg)
            else:
                s.commit_arm(arg)
                committed = True
        assert len(s.revealed) <= budget
        assert set(s.revealed) == seen
