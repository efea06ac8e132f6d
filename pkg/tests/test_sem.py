import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lvlingam import catalog
from lvlingam.graph import is_canonical, validate
from lvlingam.mixing import build_mixing
from lvlingam.sem import (Dataset, DimensionMismatch, InvalidDimensions, NoiseSpec, UnknownEdge,
                          random_canonical_dag, sample_weights, simulate_linear,
                          simulate_misspecified)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 12), st.integers(0, 6), st.floats(0.01, 1.0), st.integers(0, 10**6))
def test_generator_is_canonical(p_o, p_l, prob, seed):
    dag = random_canonical_dag(p_o, p_l, prob, seed)
    assert is_canonical(dag)
    assert dag.p_o == p_o and dag.p_l == p_l


def test_generator_is_seeded():
    a = random_canonical_dag(6, 3, 0.4, 11)
    b = random_canonical_dag(6, 3, 0.4, 11)
    assert a.edges == b.edges


def test_generator_bad_dimensions():
    with pytest.raises(InvalidDimensions):
        random_canonical_dag(1, 1, 0.5, 0)
    with pytest.raises(InvalidDimensions):
        random_canonical_dag(3, 0, 0.0, 0)


def test_weights_in_range():
    dag = random_canonical_dag(8, 3, 0.5, 2)
    model = sample_weights(dag, 2)
    for e, w in model.weights.items():
        if e in model.scaling_edges:
            assert w == 1.0
        else:
            assert 0.5 <= abs(w) <= 1.0


def test_linear_samples_follow_mixing_matrix():
    dag = validate(catalog.iv())
    model = sample_weights(dag, 0)
    data = simulate_linear(model, NoiseSpec.laplace(), 200_000, 1)
    b = build_mixing(model).values
    cov = np.cov(data.values, rowvar=False)
    np.testing.assert_allclose(cov, 2.0 * b @ b.T, rtol=0.05, atol=0.05)


def test_noise_scales_applied():
    dag = validate(catalog.iv())
    model = sample_weights(dag, 0)
    spec = NoiseSpec.uniform(scales={0: 3.0})
    data = simulate_linear(model, spec, 50_000, 0)
    assert np.abs(data.values[:, 0]).max() <= 3.0
    assert np.abs(data.values[:, 0]).max() > 2.5


def test_noise_validation():
    with pytest.raises(ValueError):
        NoiseSpec("gaussian")
    with pytest.raises(ValueError):
        NoiseSpec.laplace(scale=-1)
    with pytest.raises(ValueError):
        NoiseSpec.laplace(scales={0: 0.0})


def test_misspecified_requires_observed_edge():
    dag = validate(catalog.g1())
    model = sample_weights(dag, 0)
    with pytest.raises(UnknownEdge):
        simulate_misspecified(model, None, (dag.node("W"), dag.node("T")), 10, 0)
    data = simulate_misspecified(model, None, (dag.node("T"), dag.node("Y")), 100, 0)
    assert data.values.shape == (100, 3)


def test_csv_roundtrip(tmp_path):
    dag = validate(catalog.g1())
    data = simulate_linear(sample_weights(dag, 0), None, 50, 0)
    path = tmp_path / "d.csv"
    data.to_csv(path)
    back = Dataset.from_csv(path)
    assert back.columns == data.columns
    np.testing.assert_array_equal(back.values, data.values)


def test_dataset_alignment_and_errors():
    dag = validate(catalog.iv())
    d = Dataset(np.arange(6.0).reshape(2, 3), (2, 0, 1))
    np.testing.assert_array_equal(d.aligned(dag), [[1, 2, 0], [4, 5, 3]])
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((2, 2)), (0, 1, 2))
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((2, 2)), (0, 1)).aligned(dag)
    with pytest.raises(DimensionMismatch):
        Dataset.from_csv_text("a,b\n1,2\n")
