import math

import numpy as np
import torch
from django.test import SimpleTestCase, tag
from torch import nn

from config.core.exceptions import DimensionError
from interactions.services.types import Domain, DomainDataset
from .alignment import KernelConfig, ProjectorHead, dc_mmd_loss, gradient_reversal, mmd
from .disentangle import (
    Reconstructor, VariationalNet, club_mi_loss, reconstruction_loss, total_mi_loss, variational_log_likelihood,
)
from .encoders import DisentangledBatch, build_graph, build_graphs, encode_all, propagate
from .fusion import bce_loss, domain_ce_sum, predict, score_candidates, sum_pool, tafc_fuse
from .network import CrossDomainNetwork

A, B = Domain.A, Domain.B


class _FixedGaussian(nn.Module):
    """Returns (h_s, zeros): mean equal to its input, unit variance."""
    def forward(self, h_s):
        return h_s, torch.zeros_like(h_s)


def _batch(rows=8, dim=4, seed=0):
    g = torch.Generator().manual_seed(seed)
    block = lambda: torch.randn(rows, dim, generator=g, dtype=torch.float64)
    return DisentangledBatch(
        users=torch.arange(rows),
        h_t={A: block(), B: block()},
        h_s={A: block(), B: block()},
        h_v={A: block(), B: block()},
    )


def _tiny_dataset():
    return DomainDataset(
        user_count=3,
        item_counts=(4, 3),
        train_interactions={A: [[0, 0], [0, 1], [1, 2], [2, 3]], B: [[0, 0], [1, 1], [2, 2], [2, 0]]},
        test_interactions={A: [[1, 3]], B: [[0, 2]]},
    )


class PropagationTests(SimpleTestCase):
    def test_edge_weights_use_symmetric_degree_normalization(self):
        graph = build_graph(2, 2, [[0, 0], [0, 1], [1, 1]])
        dense = graph.adjacency.to_dense()
        # user 0 has degree 2, item 1 (node 3) has degree 2
        self.assertAlmostEqual(dense[0, 3].item(), 1 / 2, places=6)
        self.assertAlmostEqual(dense[0, 2].item(), 1 / math.sqrt(2), places=6)
        self.assertAlmostEqual(dense[1, 3].item(), 1 / math.sqrt(2), places=6)
        self.assertTrue(torch.equal(dense, dense.T))

    def test_zero_layers_is_identity(self):
        graph = build_graph(2, 2, [[0, 0], [1, 1]])
        users, items = torch.randn(2, 3), torch.randn(2, 3)
        out_users, out_items = propagate(users, items, graph, 0)
        self.assertTrue(torch.equal(out_users, users))
        self.assertTrue(torch.equal(out_items, items))

    def test_single_edge_one_layer_averages_endpoints(self):
        graph = build_graph(1, 1, [[0, 0]])
        u, v = torch.tensor([[1.0, 2.0]]), torch.tensor([[3.0, -2.0]])
        out_u, out_v = propagate(u, v, graph, 1)
        torch.testing.assert_close(out_u, (u + v) / 2)
        torch.testing.assert_close(out_v, (v + u) / 2)

    def test_isolated_node_keeps_a_third_after_two_layers(self):
        graph = build_graph(2, 1, [[0, 0]])
        users = torch.tensor([[3.0], [6.0]])
        out_users, _ = propagate(users, torch.tensor([[1.0]]), graph, 2)
        self.assertAlmostEqual(out_users[1, 0].item(), 2.0, places=6)

    def test_propagation_is_linear(self):
        graph = build_graph(3, 4, [[0, 0], [0, 1], [1, 2], [2, 3], [2, 0]])
        x_u, x_v, y_u, y_v = (torch.randn(n, 5, dtype=torch.float64) for n in (3, 4, 3, 4))
        left_u, left_v = propagate(2 * x_u - 3 * y_u, 2 * x_v - 3 * y_v, graph, 2)
        px_u, px_v = propagate(x_u, x_v, graph, 2)
        py_u, py_v = propagate(y_u, y_v, graph, 2)
        torch.testing.assert_close(left_u, 2 * px_u - 3 * py_u)
        torch.testing.assert_close(left_v, 2 * px_v - 3 * py_v)

    def test_row_norms_do_not_grow(self):
        graph = build_graph(3, 4, [[0, 0], [0, 1], [1, 2], [2, 3], [2, 0]])
        users, items = torch.randn(3, 6), torch.randn(4, 6)
        out_u, out_v = propagate(users, items, graph, 2)
        before = torch.cat([users, items]).norm(dim=1).max()
        after = torch.cat([out_u, out_v]).norm(dim=1).max()
        self.assertLessEqual(after.item(), before.item() + 1e-6)

    def test_size_mismatch_raises(self):
        graph = build_graph(2, 2, [[0, 0]])
        with self.assertRaises(DimensionError):
            propagate(torch.zeros(3, 2), torch.zeros(2, 2), graph, 1)
        with self.assertRaises(ValueError):
            propagate(torch.zeros(2, 2), torch.zeros(2, 2), graph, -1)


class EncodeTests(SimpleTestCase):
    def setUp(self):
        self.dataset = _tiny_dataset()
        self.graphs = build_graphs(self.dataset)

    def _network(self, layers):
        network = CrossDomainNetwork(3, (4, 3), dim=4, layers=layers)
        network.reset_parameters(torch.Generator().manual_seed(1))
        return network

    def test_zero_layers_reduces_to_lookup(self):
        network = self._network(0)
        batch = encode_all(network, self.graphs, [2, 0], {A: [1, 3], B: [0]})
        torch.testing.assert_close(batch.h_t[A], network.user_t['A'].weight[[2, 0]])
        torch.testing.assert_close(batch.h_s[B], network.user_s['B'].weight[[2, 0]])
        torch.testing.assert_close(batch.h_v[A], network.items['A'].weight[[1, 3]])

    def test_encoding_is_pure(self):
        network = self._network(2)
        first = encode_all(network, self.graphs, [0, 1, 2], {A: [0, 1], B: [2]})
        second = encode_all(network, self.graphs, [0, 1, 2], {A: [0, 1], B: [2]})
        for domain in (A, B):
            self.assertTrue(torch.equal(first.h_t[domain], second.h_t[domain]))
            self.assertTrue(torch.equal(first.h_v[domain], second.h_v[domain]))

    def test_one_layer_matches_dense_propagation(self):
        network = self._network(1)
        batch = encode_all(network, self.graphs, [0, 1, 2], {A: [0, 1, 2, 3], B: [0, 1, 2]})
        dense = self.graphs[A].adjacency.to_dense()
        stacked = torch.cat([network.user_t['A'].weight, network.items['A'].weight])
        expected = (stacked + dense @ stacked) / 2
        torch.testing.assert_close(batch.h_t[A], expected[:3])
        torch.testing.assert_close(batch.h_v[A], expected[3:])

    def test_out_of_range_index_raises(self):
        network = self._network(1)
        with self.assertRaises(IndexError):
            encode_all(network, self.graphs, [5], {A: [0], B: [0]})


class NetworkInitTests(SimpleTestCase):
    def test_tables_have_requested_width(self):
        network = CrossDomainNetwork(5, (7, 9), dim=128)
        for key in ('A', 'B'):
            self.assertEqual(network.user_t[key].weight.shape, (5, 128))
            self.assertEqual(network.user_s[key].weight.shape, (5, 128))
        self.assertEqual(network.items['B'].weight.shape, (9, 128))

    def test_same_seed_gives_identical_parameters(self):
        first, second = CrossDomainNetwork(4, (3, 3), dim=8), CrossDomainNetwork(4, (3, 3), dim=8)
        first.reset_parameters(torch.Generator().manual_seed(3))
        second.reset_parameters(torch.Generator().manual_seed(3))
        for (name, left), (_, right) in zip(first.named_parameters(), second.named_parameters()):
            self.assertTrue(torch.equal(left, right), name)

    def test_embedding_mean_is_near_zero(self):
        network = CrossDomainNetwork(100, (10, 10), dim=100)
        network.reset_parameters(torch.Generator().manual_seed(0))
        table = network.user_t['A'].weight
        sigma = (1 / math.sqrt(100)) / math.sqrt(table.numel())
        self.assertLess(abs(table.mean().item()), 4 * sigma)

    def test_parameter_groups_partition_the_network(self):
        network = CrossDomainNetwork(4, (3, 3), dim=8)
        main = {id(p) for p in network.main_parameters()}
        variational = {id(p) for p in network.variational_parameters()}
        self.assertFalse(main & variational)
        self.assertEqual(main | variational, {id(p) for p in network.parameters()})


class MMDTests(SimpleTestCase):
    def test_identical_samples_give_zero(self):
        x = torch.randn(16, 4, dtype=torch.float64)
        self.assertLessEqual(mmd(x, x).item(), 1e-7)

    def test_symmetric_exactly(self):
        x, y = torch.randn(12, 3), torch.randn(9, 3) + 1
        self.assertEqual(mmd(x, y).item(), mmd(y, x).item())

    def test_invariant_to_row_permutation(self):
        x, y = torch.randn(12, 3), torch.randn(9, 3) + 1
        shuffled = mmd(x[torch.randperm(12)], y[torch.randperm(9)])
        self.assertEqual(mmd(x, y).item(), shuffled.item())

    def test_single_sample_single_bandwidth(self):
        x, y = torch.tensor([[0.0, 1.0]], dtype=torch.float64), torch.tensor([[2.0, 0.0]], dtype=torch.float64)
        sigma = 1.5
        expected = math.sqrt(2 - 2 * math.exp(-5.0 / (2 * sigma ** 2)))
        self.assertAlmostEqual(mmd(x, y, KernelConfig(bandwidths=(sigma,))).item(), expected, places=10)

    def test_width_mismatch_raises(self):
        with self.assertRaises(DimensionError):
            mmd(torch.zeros(3, 2), torch.zeros(3, 4))

    def test_non_positive_bandwidth_rejected(self):
        with self.assertRaises(ValueError):
            KernelConfig(bandwidths=(1.0, 0.0))

    def test_median_bandwidths_carry_no_gradient(self):
        x = torch.randn(6, 3, dtype=torch.float64, requires_grad=True)
        squared = ((x.unsqueeze(1) - x.unsqueeze(0)) ** 2).sum(dim=-1)
        sigmas = KernelConfig().sigmas(squared)
        self.assertFalse(sigmas.requires_grad)
        self.assertEqual(len(sigmas), len(KernelConfig().multipliers))

    @tag('slow')
    def test_shifted_gaussians_are_separated(self):
        wins = 0
        for trial in range(100):
            g = torch.Generator().manual_seed(trial)
            x = torch.randn(256, 2, generator=g)
            fresh = torch.randn(256, 2, generator=g)
            shifted = torch.randn(256, 2, generator=g) + 5
            wins += int(mmd(x, shifted) > mmd(x, fresh))
        self.assertGreaterEqual(wins, 99)

    @tag('slow')
    def test_optimizing_alignment_halves_the_discrepancy(self):
        g = torch.Generator().manual_seed(0)
        x = torch.randn(128, 2, generator=g).requires_grad_()
        y = torch.randn(128, 2, generator=g) + 3
        optimizer = torch.optim.Adam([x], lr=0.05)
        initial = mmd(x, y).item()
        for _ in range(200):
            optimizer.zero_grad()
            loss = mmd(x, y)
            loss.backward()
            optimizer.step()
        self.assertLessEqual(mmd(x, y).item(), 0.5 * initial)


class GradientReversalTests(SimpleTestCase):
    def test_forward_is_identity(self):
        x = torch.randn(4, 3)
        self.assertTrue(torch.equal(gradient_reversal(x), x))

    def test_backward_negates_and_scales(self):
        for scale, expected in ((1.0, -1.0), (0.5, -0.5)):
            x = torch.randn(4, 3, requires_grad=True)
            gradient_reversal(x, scale).sum().backward()
            self.assertTrue(torch.equal(x.grad, torch.full((4, 3), expected)))

    def test_scale_must_be_positive(self):
        for scale in (0.0, -1.0):
            with self.assertRaises(ValueError):
                gradient_reversal(torch.ones(2, 2), scale)


class DCMMDTests(SimpleTestCase):
    def setUp(self):
        torch.manual_seed(0)
        self.projectors = {'A': ProjectorHead(4).double(), 'B': ProjectorHead(4).double()}

    def test_symmetric_adds_a_non_negative_term(self):
        batch = _batch()
        asymmetric = dc_mmd_loss(batch, self.projectors, symmetric=False)
        symmetric = dc_mmd_loss(batch, self.projectors, symmetric=True)
        self.assertGreaterEqual(symmetric.item(), asymmetric.item())

    def test_zero_when_everything_coincides(self):
        h = torch.randn(6, 4, dtype=torch.float64)
        batch = DisentangledBatch(
            users=torch.arange(6), h_t={A: h, B: h.clone()}, h_s={A: h, B: h}, h_v={A: h, B: h},
        )
        identity = {'A': nn.Identity(), 'B': nn.Identity()}
        self.assertLessEqual(dc_mmd_loss(batch, identity).item(), 1e-7)

    def test_misaligned_rows_rejected(self):
        with self.assertRaises(DimensionError):
            DisentangledBatch(
                users=torch.arange(3),
                h_t={A: torch.zeros(3, 2), B: torch.zeros(4, 2)},
                h_s={A: torch.zeros(3, 2), B: torch.zeros(3, 2)},
                h_v={A: torch.zeros(5, 2), B: torch.zeros(5, 2)},
            )


class VariationalTests(SimpleTestCase):
    def test_log_likelihood_at_the_mean(self):
        h = torch.randn(10, 6, dtype=torch.float64)
        value = variational_log_likelihood(_FixedGaussian(), h, h)
        self.assertAlmostEqual(value.item(), -3 * math.log(2 * math.pi), places=10)

    def test_one_dimensional_density(self):
        value = variational_log_likelihood(_FixedGaussian(), torch.ones(1, 1, dtype=torch.float64),
                                           torch.zeros(1, 1, dtype=torch.float64))
        self.assertAlmostEqual(value.item(), -0.5 * math.log(2 * math.pi) - 0.5, places=10)
        self.assertAlmostEqual(value.item(), -1.4189, places=4)

    def test_larger_residual_lowers_likelihood(self):
        mean = torch.zeros(4, 3)
        residual = torch.randn(4, 3)
        near = variational_log_likelihood(_FixedGaussian(), residual, mean)
        far = variational_log_likelihood(_FixedGaussian(), 2 * residual, mean)
        self.assertLess(far.item(), near.item())

    def test_log_variance_is_clamped(self):
        net = VariationalNet(3, hidden=5, logvar_clamp=10.0)
        with torch.no_grad():
            net.log_variance.bias.fill_(1e3)
        _, log_variance = net(torch.randn(4, 3))
        self.assertEqual(log_variance.max().item(), 10.0)
        self.assertEqual(net.mean.out_features, 3)

    def test_default_hidden_width_is_twice_the_dimension(self):
        self.assertEqual(VariationalNet(8).trunk[0].out_features, 16)

    def test_identity_shuffle_gives_zero(self):
        net = VariationalNet(4).double()
        h_t, h_s = torch.randn(8, 4, dtype=torch.float64), torch.randn(8, 4, dtype=torch.float64)
        self.assertEqual(club_mi_loss(net, h_t, h_s, permutation=torch.arange(8)).item(), 0.0)

    def test_needs_two_rows(self):
        with self.assertRaises(DimensionError):
            club_mi_loss(VariationalNet(2), torch.zeros(1, 2), torch.zeros(1, 2))

    def test_frozen_estimate_is_invariant_to_joint_row_permutation_on_average(self):
        torch.manual_seed(0)
        net = VariationalNet(3, hidden=8)
        h_t, h_s = torch.randn(32, 3), torch.randn(32, 3)
        order = torch.randperm(32)
        g = torch.Generator().manual_seed(5)
        with torch.no_grad():
            plain = torch.stack([club_mi_loss(net, h_t, h_s, generator=g) for _ in range(100)])
            permuted = torch.stack([club_mi_loss(net, h_t[order], h_s[order], generator=g) for _ in range(100)])
        spread = math.sqrt((plain.var() + permuted.var()).item() / 100)
        self.assertLess(abs(plain.mean().item() - permuted.mean().item()), 5 * spread + 1e-6)

    def test_total_mi_weighting(self):
        self.assertAlmostEqual(total_mi_loss(10.0, 10.0, 1e-4, 9e-4), 0.01, places=12)
        self.assertEqual(total_mi_loss(3.0, 4.0, 0.0, 0.0), 0.0)
        self.assertAlmostEqual(total_mi_loss(2.0, -1.0, 0.5, 0.5), 0.5)

    def _fit(self, net, h_t, h_s, steps=200):
        optimizer = torch.optim.Adam(net.parameters(), lr=0.01)
        for _ in range(steps):
            optimizer.zero_grad()
            (-variational_log_likelihood(net, h_t, h_s)).backward()
            optimizer.step()

    @tag('slow')
    def test_independent_samples_estimate_near_zero(self):
        torch.manual_seed(0)
        h_t, h_s = torch.randn(512, 2), torch.randn(512, 2)
        net = VariationalNet(2, hidden=16)
        self._fit(net, h_t, h_s)
        with torch.no_grad():
            estimate = club_mi_loss(net, h_t, h_s, generator=torch.Generator().manual_seed(1))
        self.assertLess(abs(estimate.item()), 0.1)

    @tag('slow')
    def test_correlated_samples_exceed_half_the_true_information(self):
        torch.manual_seed(0)
        rho = 0.9
        h_s = torch.randn(512, 1)
        h_t = rho * h_s + math.sqrt(1 - rho ** 2) * torch.randn(512, 1)
        net = VariationalNet(1, hidden=16)
        self._fit(net, h_t, h_s)
        with torch.no_grad():
            estimate = club_mi_loss(net, h_t, h_s, generator=torch.Generator().manual_seed(1))
        self.assertGreaterEqual(estimate.item(), 0.5 * (-0.5 * math.log(1 - rho ** 2)))


class ReconstructionTests(SimpleTestCase):
    def test_exact_reconstruction_is_zero(self):
        batch = _batch()
        identity = {'A': nn.Identity(), 'B': nn.Identity()}
        raw = {d: (batch.h_t[d], batch.h_s[d]) for d in (A, B)}
        self.assertEqual(reconstruction_loss(identity, batch, raw, 0.01, 0.09).item(), 0.0)

    def test_weighted_per_domain_residuals(self):
        batch = _batch(rows=2, dim=2)
        identity = {'A': nn.Identity(), 'B': nn.Identity()}
        raw = {}
        for domain, shift in ((A, 1.0), (B, math.sqrt(0.5))):
            # each row misses by `shift` in all four coordinates: squared norm 4 * shift^2
            raw[domain] = (batch.h_t[domain] + shift, batch.h_s[domain] + shift)
        value = reconstruction_loss(identity, batch, raw, 0.01, 0.09)
        self.assertAlmostEqual(value.item(), 0.01 * 4 + 0.09 * 2, places=10)

    def test_targets_receive_no_gradient(self):
        batch = _batch(rows=4, dim=2)
        u_t = torch.randn(4, 2, dtype=torch.float64, requires_grad=True)
        u_s = torch.randn(4, 2, dtype=torch.float64, requires_grad=True)
        reconstructors = {'A': Reconstructor(2, 8).double(), 'B': Reconstructor(2, 8).double()}
        loss = reconstruction_loss(reconstructors, batch, {A: (u_t, u_s), B: (u_t, u_s)}, 1.0, 1.0)
        loss.backward()
        self.assertIsNone(u_t.grad)
        self.assertGreaterEqual(loss.item(), 0.0)

    def test_width_mismatch_raises(self):
        batch = _batch(rows=2, dim=2)
        identity = {'A': nn.Identity(), 'B': nn.Identity()}
        raw = {d: (torch.zeros(2, 3, dtype=torch.float64), torch.zeros(2, 3, dtype=torch.float64)) for d in (A, B)}
        with self.assertRaises(DimensionError):
            reconstruction_loss(identity, batch, raw, 1.0, 1.0)

    @tag('slow')
    def test_reconstructor_overfits_one_batch(self):
        torch.manual_seed(0)
        reconstructor = Reconstructor(8)
        inputs, targets = torch.randn(32, 16), torch.randn(32, 16)
        optimizer = torch.optim.Adam(reconstructor.parameters(), lr=0.005)
        initial = ((reconstructor(inputs) - targets) ** 2).sum(dim=1).mean().item()
        for _ in range(500):
            optimizer.zero_grad()
            loss = ((reconstructor(inputs) - targets) ** 2).sum(dim=1).mean()
            loss.backward()
            optimizer.step()
        self.assertLessEqual(loss.item(), 0.1 * initial)


class FusionTests(SimpleTestCase):
    def test_identical_reps_get_uniform_weights(self):
        rep = torch.randn(4)
        fused = tafc_fuse(torch.randn(4), (rep, rep, rep))
        torch.testing.assert_close(fused.attention_weights, torch.full((3,), 1 / 3))
        torch.testing.assert_close(fused.e, rep)

    def test_hand_evaluated_softmax(self):
        fused = tafc_fuse(torch.tensor([1.0]), (torch.tensor([0.0]), torch.tensor([0.0]), torch.tensor([1.0])))
        torch.testing.assert_close(fused.attention_weights, torch.tensor([0.2119, 0.2119, 0.5761]), atol=1e-4, rtol=0)

    def test_positive_query_scaling_keeps_argmax(self):
        h_v, reps = torch.randn(5), tuple(torch.randn(5) for _ in range(3))
        base = tafc_fuse(h_v, reps).attention_weights.argmax()
        self.assertEqual(tafc_fuse(7.5 * h_v, reps).attention_weights.argmax(), base)

    def test_weights_form_a_probability_vector_and_e_is_convex(self):
        h_v = torch.randn(6, 4, dtype=torch.float64)
        reps = tuple(torch.randn(6, 4, dtype=torch.float64) for _ in range(3))
        fused = tafc_fuse(h_v, reps)
        self.assertTrue((fused.attention_weights >= 0).all())
        torch.testing.assert_close(fused.attention_weights.sum(dim=-1), torch.ones(6, dtype=torch.float64))
        combination = sum(fused.attention_weights[:, k:k + 1] * reps[k] for k in range(3))
        self.assertLess((fused.e - combination).abs().max().item(), 1e-6)

    def test_permuting_reps_permutes_weights(self):
        h_v = torch.randn(4, dtype=torch.float64)
        reps = tuple(torch.randn(4, dtype=torch.float64) for _ in range(3))
        fused = tafc_fuse(h_v, reps)
        swapped = tafc_fuse(h_v, (reps[2], reps[0], reps[1]))
        torch.testing.assert_close(swapped.attention_weights, fused.attention_weights[[2, 0, 1]])
        torch.testing.assert_close(swapped.e, fused.e)

    def test_width_mismatch_raises(self):
        with self.assertRaises(DimensionError):
            tafc_fuse(torch.zeros(3), (torch.zeros(4), torch.zeros(4), torch.zeros(4)))

    def test_sum_pool_adds_the_triple(self):
        reps = (torch.tensor([1.0, 0.0]), torch.tensor([0.0, 2.0]), torch.tensor([1.0, 1.0]))
        torch.testing.assert_close(sum_pool(torch.zeros(2), reps).e, torch.tensor([2.0, 3.0]))

    def test_sum_pool_weights_are_uniform(self):
        reps = (torch.ones(4, 2), torch.zeros(4, 2), torch.ones(4, 2))
        fused = sum_pool(torch.zeros(4, 2), reps)
        torch.testing.assert_close(fused.attention_weights, torch.full((4, 3), 1 / 3))
        torch.testing.assert_close(fused.attention_weights.sum(dim=-1), torch.ones(4))

    def test_sum_pooled_candidates_report_uniform_weights(self):
        batch = _batch(rows=6, dim=4)
        candidates = torch.tensor([[0, 1], [2, 3], [4, 5]])
        scores, weights = score_candidates(batch, A, [0, 1, 2], candidates, attention=False, with_weights=True)
        torch.testing.assert_close(weights.sum(dim=-1), torch.ones(3, 2, dtype=torch.float64))
        h_v = batch.h_v[A][3]
        fused = sum_pool(h_v, (batch.h_t[B][1], batch.h_t[A][1], batch.h_s[A][1]))
        self.assertAlmostEqual(scores[1, 1].item(), predict(fused.e, h_v).item(), places=10)

    def test_predict_is_a_dot_product(self):
        h_v = torch.tensor([2.0, 0.0])
        self.assertEqual(predict(torch.zeros(2), h_v).item(), 0.0)
        self.assertEqual(predict(h_v, h_v).item(), 4.0)
        self.assertEqual(predict(torch.tensor([0.0, 3.0]), h_v).item(), 0.0)

    def test_candidate_scores_match_pairwise_fusion(self):
        batch = _batch(rows=6, dim=4)
        candidates = torch.tensor([[0, 1], [2, 3], [4, 5]])
        scores, weights = score_candidates(batch, A, [0, 1, 2], candidates, with_weights=True)
        self.assertEqual(scores.shape, (3, 2))
        self.assertEqual(weights.shape, (3, 2, 3))
        h_v = batch.h_v[A][5]
        fused = tafc_fuse(h_v, (batch.h_t[B][2], batch.h_t[A][2], batch.h_s[A][2]))
        self.assertAlmostEqual(scores[2, 1].item(), predict(fused.e, h_v).item(), places=10)


class CrossEntropyTests(SimpleTestCase):
    def test_zero_logit(self):
        self.assertAlmostEqual(bce_loss(torch.tensor([0.0]), torch.tensor([1.0])).item(), math.log(2), places=6)

    def test_large_logit_is_stable(self):
        value = bce_loss(torch.tensor([20.0], dtype=torch.float64), torch.tensor([1.0], dtype=torch.float64))
        self.assertTrue(math.isfinite(value.item()))
        self.assertAlmostEqual(value.item(), math.log1p(math.exp(-20.0)), places=15)

    def test_confident_correct_scores_approach_zero(self):
        value = bce_loss(torch.tensor([50.0, -50.0]), torch.tensor([1.0, 0.0]))
        self.assertGreaterEqual(value.item(), 0.0)
        self.assertLess(value.item(), 1e-12)

    def test_empty_batch_raises(self):
        with self.assertRaises(ValueError):
            bce_loss(torch.tensor([]), torch.tensor([]))

    def test_domain_sum(self):
        self.assertAlmostEqual(domain_ce_sum(0.5, 0.3), 0.8)
        self.assertEqual(domain_ce_sum(0.0, 0.0), 0.0)
        self.assertEqual(domain_ce_sum(1.25, 0.0), 1.25)
