import math

import numpy as np
import pytest

from pbalance.er.data import (
    SCENARIO_COUNTS,
    SCENARIO_MU,
    ERDataset,
    counts_from_mu,
    empirical_theta,
    generate_synthetic,
    read_dataset_csv,
    scenario_counts,
    write_dataset_csv,
)
from pbalance.er.likelihood import (
    cluster_log_marginal,
    exact_partition_posterior,
    log_record_likelihood,
    new_cluster_log_likelihood,
)
from pbalance.esc import ESCModel, ZTPoisson


@pytest.mark.parametrize("scenario", [1, 2, 3])
def test_scenario_counts_follow_size_law(scenario):
    counts = SCENARIO_COUNTS[scenario]
    assert counts_from_mu(SCENARIO_MU[scenario]) == counts
    assert sum(counts) == {1: 101, 2: 101, 3: 99}[scenario]


def test_scenario_counts_inputs():
    assert scenario_counts((2, 1)) == (2, 1)
    assert scenario_counts(ZTPoisson(5.0)) == SCENARIO_COUNTS[2]
    for bad in (9, (0, 0), (-1, 2)):
        with pytest.raises(ValueError):
            scenario_counts(bad)


def test_generate_synthetic_shape_and_truth():
    ds = generate_synthetic(1, L=5, D=10, beta=0.01, seed=3)
    sizes = sorted(np.bincount(ds.truth.labels))
    want = sorted(np.repeat(np.arange(1, 10), SCENARIO_COUNTS[1]))
    assert sizes == want
    assert ds.n == sum(s * c for s, c in enumerate(SCENARIO_COUNTS[1], start=1))
    assert ds.L == 5 and ds.meta["K"] == 101
    again = generate_synthetic(1, L=5, D=10, beta=0.01, seed=3)
    assert np.array_equal(ds.x, again.x) and ds.truth == again.truth


def test_zero_distortion_copies_entities():
    ds = generate_synthetic((3, 2, 2), L=4, D=6, beta=0.0, seed=1)
    lab = np.asarray(ds.truth.labels)
    for c in range(lab.max() + 1):
        block = ds.x[lab == c]
        assert np.all(block == block[0])


def test_full_distortion_rate():
    ds = generate_synthetic(2, L=3, D=50, beta=1.0, seed=0, shuffle=False)
    lab = np.asarray(ds.truth.labels)
    # with everything redrawn, records of an entity agree only by chance (rate 1/50)
    agree = np.mean([np.mean(ds.x[i] == ds.x[i + 1]) for i in range(ds.n - 1) if lab[i] == lab[i + 1]])
    assert agree < 0.1


def test_csv_round_trip(tmp_path):
    ds = generate_synthetic(1, L=3, D=4, seed=2)
    path = tmp_path / "d.csv"
    write_dataset_csv(ds, path)
    head = path.read_text().splitlines()[0]
    assert head == "f1,f2,f3,truth"
    back = read_dataset_csv(path, D=4)
    assert np.array_equal(back.x, ds.x)
    assert back.truth == ds.truth
    assert np.allclose(back.theta, empirical_theta(ds.x, ds.D))
    assert np.all(np.loadtxt(path, delimiter=",", skiprows=1)[:, :3] >= 1)


def test_dataset_validation():
    theta = np.full((2, 2), 0.5)
    with pytest.raises(ValueError):
        ERDataset(np.array([[0, 2]]), np.array([2, 2]), theta)
    with pytest.raises(ValueError):
        ERDataset(np.array([[0, 1]]), np.array([2, 2]), np.array([[0.5, 0.4], [0.5, 0.5]]))
    with pytest.raises(ValueError):
        ERDataset(np.array([0, 1]), np.array([2, 2]), theta)


def test_record_likelihood():
    theta = np.array([[0.2, 0.8], [0.5, 0.5]])
    beta = np.array([0.1, 0.3])
    got = log_record_likelihood([0, 1], [0, 0], beta, theta)
    want = math.log(0.9 + 0.1 * 0.2) + math.log(0.3 * 0.5)
    assert got == pytest.approx(want)
    assert new_cluster_log_likelihood([1, 0], theta) == pytest.approx(math.log(0.8 * 0.5))


def test_cluster_marginal_by_summing_entities():
    theta = np.array([[0.2, 0.3, 0.5], [0.6, 0.4, 0.0]])
    D = np.array([3, 2])
    beta = np.array([0.2, 0.4])
    block = np.array([[0, 1], [2, 1], [0, 0]])
    want = 0.0
    for y0 in range(3):
        for y1 in range(2):
            p = theta[0, y0] * theta[1, y1]
            for row in block:
                p *= math.exp(log_record_likelihood(row, [y0, y1], beta, theta))
            want += p
    assert cluster_log_marginal(block, beta, theta, D) == pytest.approx(math.log(want))
    # a single record's marginal is its theta probability
    assert cluster_log_marginal(block[:1], beta, theta, D) == pytest.approx(new_cluster_log_likelihood(block[0], theta))


def test_exact_posterior_is_normalized():
    x = np.array([[0, 0], [0, 0], [1, 1], [1, 1]])
    D = np.array([10, 10])
    ds = ERDataset(x, D, np.full((2, 10), 0.1))
    post = exact_partition_posterior(ds, ESCModel(ZTPoisson(1.0)), np.array([0.1, 0.1]))
    assert len(post) == 15
    assert sum(post.values()) == pytest.approx(1.0)
    assert max(post, key=post.get) == (0, 0, 1, 1)
