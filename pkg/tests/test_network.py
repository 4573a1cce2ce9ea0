"""Network construction, Kron reduction and coupling-matrix validation."""

import numpy as np
import pytest

from swingcert.errors import (ConnectivityError, ReductionError, ValidationError)
from swingcert.network import (Branch, Bus, NetworkModel, build_network,
                               coupled_pairs, kron_reduce, sync_coefficients)


def machine(bus_id, p_ref=0.0, inertia=1.0, droop=1.0, voltage=1.0):
    return Bus(id=bus_id, kind="machine", voltage_mag=voltage, p_ref=p_ref,
               inertia=inertia, droop=droop)


def passive(bus_id, voltage=1.0):
    return Bus(id=bus_id, kind="passive", voltage_mag=voltage)


def schur_oracle(b, keep):
    """Dense Schur complement on the nodal Laplacian, branch form out."""
    lap = np.diag(b.sum(axis=1)) - b
    drop = [i for i in range(b.shape[0]) if i not in keep]
    l_kk = lap[np.ix_(keep, keep)]
    l_kd = lap[np.ix_(keep, drop)]
    l_dd = lap[np.ix_(drop, drop)]
    red = l_kk - l_kd @ np.linalg.inv(l_dd) @ l_kd.T
    out = -red
    np.fill_diagonal(out, 0.0)
    return out


class TestBuildNetwork:
    def test_two_machines_unit_branch(self):
        model = build_network(
            [machine("a", p_ref=0.5), machine("b", p_ref=-0.5)],
            [Branch("a", "b", 1.0)],
        )
        assert np.array_equal(model.k_matrix, [[0.0, 1.0], [1.0, 0.0]])

    def test_single_machine_empty_topology(self):
        model = build_network([machine("only")], [])
        assert model.k_matrix.shape == (1, 1)
        assert model.k_matrix[0, 0] == 0.0

    def test_disconnected_network_rejected_naming_component(self):
        with pytest.raises(ConnectivityError) as err:
            build_network([machine("a"), machine("b"), machine("c")],
                          [Branch("a", "b", 1.0)])
        assert "c" in str(err.value)
        assert err.value.component == ("c",)

    def test_chain_through_passive_bus(self):
        # series combination: 2*2/(2+2) = 1
        model = build_network(
            [machine("m1"), passive("mid"), machine("m2")],
            [Branch("m1", "mid", 2.0), Branch("mid", "m2", 2.0)],
        )
        assert model.k_matrix[0, 1] == pytest.approx(1.0, abs=1e-12)

    def test_parallel_branches_add(self):
        model = build_network(
            [machine("a"), machine("b")],
            [Branch("a", "b", 1.0), Branch("a", "b", 0.5)],
        )
        assert model.k_matrix[0, 1] == pytest.approx(1.5)

    def test_voltage_scaling(self):
        model = build_network(
            [machine("a", voltage=1.05), machine("b", voltage=0.95)],
            [Branch("a", "b", 2.0)],
        )
        assert model.k_matrix[0, 1] == pytest.approx(1.995)

    def test_unknown_branch_endpoint(self):
        with pytest.raises(ValidationError, match="unknown bus"):
            build_network([machine("a"), machine("b")], [Branch("a", "zz", 1.0)])

    def test_duplicate_ids(self):
        with pytest.raises(ValidationError, match="duplicate"):
            build_network([machine("a"), machine("a")], [])

    def test_needs_a_machine(self):
        with pytest.raises(ValidationError, match="machine"):
            build_network([passive("p1")], [])


class TestBusBranchValidation:
    def test_nonpositive_droop(self):
        with pytest.raises(ValidationError, match="droop"):
            machine("a", droop=0.0)

    def test_negative_inertia(self):
        with pytest.raises(ValidationError, match="inertia"):
            machine("a", inertia=-1.0)

    def test_nonpositive_voltage(self):
        with pytest.raises(ValidationError, match="voltage"):
            machine("a", voltage=0.0)

    def test_nonpositive_susceptance(self):
        with pytest.raises(ValidationError, match="susceptance"):
            Branch("a", "b", 0.0)

    def test_self_loop(self):
        with pytest.raises(ValidationError, match="self-loop"):
            Branch("a", "a", 1.0)


class TestKronReduce:
    def test_identity_when_all_retained(self):
        b = np.array([[0.0, 2.0], [2.0, 0.0]])
        out = kron_reduce(b, [0, 1])
        assert np.array_equal(out, b)
        # idempotent on an already-reduced matrix
        assert np.array_equal(kron_reduce(out, [0, 1]), out)

    def test_chain_elimination(self):
        b = np.array([
            [0.0, 2.0, 0.0],
            [2.0, 0.0, 2.0],
            [0.0, 2.0, 0.0],
        ])
        out = kron_reduce(b, [0, 2])
        assert out[0, 1] == pytest.approx(1.0, abs=1e-12)
        assert np.allclose(out, schur_oracle(b, [0, 2]), atol=1e-12)

    def test_star_hub_symmetric(self):
        n = 4  # three machines through one hub, equal susceptances
        b = np.zeros((n, n))
        for m in range(3):
            b[m, 3] = b[3, m] = 1.5
        out = kron_reduce(b, [0, 1, 2])
        offdiag = [out[0, 1], out[0, 2], out[1, 2]]
        assert np.allclose(offdiag, offdiag[0])
        assert np.allclose(out, schur_oracle(b, [0, 1, 2]), atol=1e-12)

    def test_random_networks_match_dense_oracle(self, rng):
        for _ in range(25):
            n = int(rng.integers(3, 9))
            b = np.zeros((n, n))
            # random connected graph: spanning tree plus extras
            for m in range(1, n):
                q = int(rng.integers(0, m))
                w = rng.uniform(0.2, 3.0)
                b[m, q] = b[q, m] = w
            for _ in range(n):
                m, q = rng.integers(0, n, size=2)
                if m != q and b[m, q] == 0.0:
                    w = rng.uniform(0.2, 3.0)
                    b[m, q] = b[q, m] = w
            n_keep = int(rng.integers(2, n + 1))
            keep = sorted(rng.choice(n, size=n_keep, replace=False).tolist())
            out = kron_reduce(b, keep)
            want = schur_oracle(b, keep)
            scale = max(np.abs(want).max(), 1.0)
            assert np.abs(out - want).max() <= 1e-10 * scale
            assert np.array_equal(out, out.T)

    def test_connectivity_preserved(self, rng):
        b = np.zeros((5, 5))
        edges = [(0, 1), (1, 2), (2, 3), (3, 4)]
        for m, q in edges:
            b[m, q] = b[q, m] = 1.0
        out = kron_reduce(b, [0, 2, 4])
        pairs = coupled_pairs(out)
        # the reduced chain must still connect all three retained nodes
        assert set(pairs) == {(0, 1), (1, 2)}

    def test_isolated_passive_rejected(self):
        b = np.zeros((3, 3))
        b[0, 1] = b[1, 0] = 1.0  # node 2 floats
        with pytest.raises(ReductionError) as err:
            kron_reduce(b, [0])
        assert 2 in err.value.isolated


class TestSyncCoefficients:
    def test_unit_product(self):
        k = sync_coefficients([1.0, 1.0], np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert k[0, 1] == 1.0

    def test_arithmetic_product(self):
        k = sync_coefficients([1.05, 0.95], np.array([[0.0, 2.0], [2.0, 0.0]]))
        assert k[0, 1] == pytest.approx(1.995)

    def test_zero_coupling(self):
        k = sync_coefficients([1.2, 0.8], np.zeros((2, 2)))
        assert k[0, 1] == 0.0

    def test_negative_susceptance_rejected(self):
        with pytest.raises(ValidationError, match="lossless"):
            sync_coefficients([1.0, 1.0], np.array([[0.0, -0.1], [-0.1, 0.0]]))

    def test_nonpositive_voltage_rejected(self):
        with pytest.raises(ValidationError, match="voltage"):
            sync_coefficients([1.0, -1.0], np.zeros((2, 2)))


class TestNetworkModel:
    def test_exact_symmetry_required(self):
        k = np.array([[0.0, 1.0], [1.0 + 1e-6, 0.0]])
        with pytest.raises(ValidationError, match="symmetric"):
            NetworkModel(ids=("a", "b"), p_ref=np.zeros(2), inertia=np.ones(2),
                         droop=np.ones(2), k_matrix=k)

    def test_from_k_absorbs_rounding_skew(self):
        k = np.array([[0.0, 1.0], [1.0 + 1e-15, 0.0]])
        model = NetworkModel.from_k(("a", "b"), np.zeros(2), np.ones(2), np.ones(2), k)
        assert np.array_equal(model.k_matrix, model.k_matrix.T)

    def test_from_k_rejects_large_skew(self):
        k = np.array([[0.0, 1.0], [1.1, 0.0]])
        with pytest.raises(ValidationError, match="symmetric"):
            NetworkModel.from_k(("a", "b"), np.zeros(2), np.ones(2), np.ones(2), k)

    def test_symmetry_exact_after_build(self, rng):
        for _ in range(10):
            n = int(rng.integers(2, 6))
            buses = [machine(f"m{i}", voltage=rng.uniform(0.9, 1.1)) for i in range(n)]
            buses.append(passive("hub"))
            branches = [Branch(f"m{i}", "hub", rng.uniform(0.5, 2.0)) for i in range(n)]
            model = build_network(buses, branches)
            assert np.array_equal(model.k_matrix, model.k_matrix.T)

    def test_arrays_immutable(self):
        model = build_network([machine("a"), machine("b")], [Branch("a", "b", 1.0)])
        with pytest.raises(ValueError):
            model.k_matrix[0, 1] = 2.0
        with pytest.raises(ValueError):
            model.droop[0] = 2.0

    def test_with_uniform_tau(self):
        model = build_network([machine("a", droop=2.0), machine("b", droop=0.5)],
                              [Branch("a", "b", 1.0)])
        scaled = model.with_uniform_tau(0.05, keep_droop=True)
        assert np.allclose(scaled.inertia / scaled.droop, 0.05)
        assert np.array_equal(scaled.droop, model.droop)
        scaled_j = model.with_uniform_tau(0.05, keep_droop=False)
        assert np.allclose(scaled_j.inertia / scaled_j.droop, 0.05)
        assert np.array_equal(scaled_j.inertia, model.inertia)

    def test_zero_droop_allowed_programmatically(self):
        # undamped energy studies need D = 0; reduced-path code rejects it
        model = NetworkModel(ids=("a", "b"), p_ref=np.zeros(2), inertia=np.ones(2),
                             droop=np.zeros(2),
                             k_matrix=np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert (model.droop == 0.0).all()
