import json
import math
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from django.test import SimpleTestCase, tag

from config.core.exceptions import DataFormatError, SamplingError
from interactions.services.sampling import build_candidate_sets
from interactions.services.synthesis import synthesize_dataset
from interactions.services.types import CandidateSet, Domain, DomainDataset, SyntheticSpec
from recsys.encoders import build_graphs
from recsys.network import CrossDomainNetwork
from .services.evaluator import DomainMetrics, EvalReport, NetworkScorer, evaluate, evaluate_domain
from .services.export import dump_attention, export_representations
from .services.metrics import batch_rank_metrics, rank_metrics, rank_of_positive
from .services.sparsity import OTHER, assign_buckets, bucket_label, sparsity_report
from .services.tables import ablation_table, report_table, sparsity_table

A, B = Domain.A, Domain.B


def _candidates(domain, users, negatives):
    return [CandidateSet(user_index=u, domain=domain, positive_item=0,
                         negatives=tuple(range(1, negatives + 1)), seed=0) for u in users]


def _oracle(domain, users, items):
    """Scores the positive column above everything else."""
    scores = np.zeros(items.shape)
    scores[:, 0] = 1.0
    return scores


class RankMetricTests(SimpleTestCase):
    def test_top_rank(self):
        self.assertEqual(rank_metrics([5.0, 1.0, 2.0]), (1, 1.0))

    def test_second_rank(self):
        hr, ndcg = rank_metrics([2.0, 3.0, 1.0])
        self.assertEqual(hr, 1)
        self.assertAlmostEqual(ndcg, 1 / math.log2(3))

    def test_outside_cutoff(self):
        scores = [0.0] + [1.0] * 10
        self.assertEqual(rank_metrics(scores, k=10), (0, 0.0))

    def test_ties_rank_the_positive_last(self):
        self.assertEqual(rank_of_positive([1.0, 1.0, 0.0]), 2)
        self.assertEqual(rank_metrics([0.5] * 100, k=10), (0, 0.0))

    def test_positive_position_can_be_anywhere(self):
        self.assertEqual(rank_of_positive([3.0, 9.0, 1.0], positive_position=1), 1)

    def test_negative_order_does_not_matter(self):
        rng = np.random.default_rng(0)
        negatives = rng.random(20)
        scores = np.concatenate([[0.6], negatives])
        shuffled = np.concatenate([[0.6], rng.permutation(negatives)])
        self.assertEqual(rank_metrics(scores), rank_metrics(shuffled))

    def test_cutoff_must_be_positive(self):
        with self.assertRaises(ValueError):
            rank_metrics([1.0, 0.0], k=0)

    def test_batch_matches_single_user(self):
        scores = np.random.default_rng(3).random((30, 15))
        hits, gains = batch_rank_metrics(scores, k=5)
        for row, hit, gain in zip(scores, hits, gains):
            expected_hit, expected_gain = rank_metrics(row, k=5)
            self.assertEqual(hit, expected_hit)
            self.assertAlmostEqual(gain, expected_gain)


class EvaluatorTests(SimpleTestCase):
    def test_oracle_scorer_is_perfect(self):
        metrics = evaluate_domain(_oracle, A, _candidates(A, range(12), 99))
        self.assertEqual(metrics.hr, 100.0)
        self.assertEqual(metrics.ndcg, 100.0)
        self.assertEqual(metrics.user_count, 12)

    def test_three_user_toy(self):
        # positive ranks 1, 3 and 20 among 25 candidates
        ranks = {0: 1, 1: 3, 2: 20}

        def scorer(domain, users, items):
            scores = np.tile(np.arange(items.shape[1], 0, -1, dtype=float), (len(users), 1))
            for row, user in enumerate(users):
                scores[row, 0] = scores[row, ranks[int(user)]] + 0.5
            return scores

        metrics = evaluate_domain(scorer, B, _candidates(B, range(3), 24), k=10)
        self.assertAlmostEqual(metrics.hr, 200 / 3)
        self.assertAlmostEqual(metrics.ndcg, 50.0)

    def test_sharding_does_not_change_the_result(self):
        rng = np.random.default_rng(5)
        table = rng.random((40, 31))

        def scorer(domain, users, items):
            return table[users]

        sets = _candidates(A, range(40), 30)
        whole = evaluate_domain(scorer, A, sets, batch_users=256)
        sharded = evaluate_domain(scorer, A, sets, batch_users=7)
        self.assertAlmostEqual(whole.hr, sharded.hr)
        self.assertAlmostEqual(whole.ndcg, sharded.ndcg)

    @tag('slow')
    def test_random_scores_hit_one_percent_over_999_negatives(self):
        rng = np.random.default_rng(11)
        hits = np.concatenate([batch_rank_metrics(rng.random((10_000, 1000)))[0] for _ in range(10)])
        self.assertEqual(len(hits), 100_000)
        self.assertLess(abs(100.0 * hits.mean() - 1.0), 0.3)

    def test_ndcg_never_exceeds_hit_ratio(self):
        rng = np.random.default_rng(5)

        def scorer(domain, users, items):
            return rng.random(items.shape)

        report = evaluate(scorer, {A: _candidates(A, range(300), 49), B: _candidates(B, range(300), 49)},
                          batch_users=64)
        for domain, metrics in report.domains.items():
            with self.subTest(domain=domain.value):
                self.assertLessEqual(metrics.ndcg, metrics.hr)
                self.assertTrue((metrics.gains <= metrics.hits).all())

    def test_missing_candidate_sets(self):
        with self.assertRaises(DataFormatError):
            evaluate_domain(_oracle, A, [])
        with self.assertRaises(DataFormatError):
            evaluate(_oracle, {A: _candidates(A, range(2), 5)})

    def test_negatives_are_truncated_to_the_requested_count(self):
        seen = []

        def scorer(domain, users, items):
            seen.append(items.shape[1])
            return _oracle(domain, users, items)

        evaluate_domain(scorer, A, _candidates(A, range(3), 10), num_negatives=5)
        self.assertEqual(seen, [6])
        with self.assertRaises(DataFormatError):
            evaluate_domain(scorer, A, _candidates(A, range(3), 10), num_negatives=20)

    def test_report_serializes_both_domains(self):
        candidates = {A: _candidates(A, range(4), 9), B: _candidates(B, range(3), 9)}
        report = evaluate(_oracle, candidates, k=10, config_hash='abc', seed=2)
        data = report.to_dict()
        self.assertEqual(data['domains']['A']['users'], 4)
        self.assertEqual(data['domains']['B']['hr'], 100.0)
        self.assertEqual(data['seed'], 2)
        self.assertNotIn('sparsity', data)


class SparsityTests(SimpleTestCase):
    def test_bucket_labels(self):
        self.assertEqual(bucket_label((1, 10)), '1-10')
        self.assertEqual(bucket_label((31, None)), '>30')

    def test_bucket_boundaries_are_inclusive(self):
        labels = assign_buckets([0, 1, 10, 11, 20, 21, 30, 31, 500])
        self.assertEqual(labels.tolist(), [OTHER, '1-10', '1-10', '11-20', '11-20', '21-30', '21-30', '>30', '>30'])

    def _dataset(self):
        train_a = [[0, i] for i in range(12)] + [[1, 0], [1, 1]] + [[2, i] for i in range(35)]
        train_b = [[0, 0], [0, 1], [1, 0], [1, 1]] + [[2, i] for i in range(5)]
        return DomainDataset(3, (40, 40), {A: train_a, B: train_b}, {A: [], B: []})

    def test_cells_partition_the_evaluated_users(self):
        users = np.arange(3)
        report = EvalReport(k=10, domains={
            A: DomainMetrics(A, 0.0, 0.0, users, np.array([1, 0, 1]), np.array([1.0, 0.0, 0.5])),
        })
        cells = sparsity_report(report, self._dataset())
        self.assertEqual(sum(cell.users for cell in cells), 3)
        by_bucket = {(cell.bucket_a, cell.bucket_b): cell for cell in cells}
        self.assertEqual(set(by_bucket), {('11-20', '1-10'), ('1-10', '1-10'), ('>30', '1-10')})
        self.assertEqual(by_bucket['>30', '1-10'].ndcg, 50.0)
        self.assertEqual(by_bucket['1-10', '1-10'].hr, 0.0)

    def test_tables_render_the_numbers(self):
        users = np.arange(3)
        report = EvalReport(k=10, domains={
            A: DomainMetrics(A, 200 / 3, 50.0, users, np.array([1, 1, 0]), np.array([1.0, 0.5, 0.0])),
        })
        self.assertIn('66.67', report_table(report))
        self.assertIn('HR@10', report_table(report))
        self.assertIn('11-20', sparsity_table(sparsity_report(report, self._dataset())))
        self.assertEqual(sparsity_table([]), '(no evaluated users)')

    def test_ablation_table_shows_mean_and_spread(self):
        summary = pd.DataFrame([{
            'variant': 'full', 'seeds': 5,
            'hr_A_mean': 12.0, 'hr_A_std': 1.5, 'ndcg_A_mean': 6.0, 'ndcg_A_std': 0.25,
            'hr_B_mean': 20.0, 'hr_B_std': 0.0, 'ndcg_B_mean': 10.0, 'ndcg_B_std': 0.5,
        }])
        table = ablation_table(summary)
        self.assertIn('12.00 ± 1.50', table)
        self.assertIn('full', table)


class ExportTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dataset = synthesize_dataset(SyntheticSpec(user_count=60, item_counts=(40, 40), latent_dim=4,
                                                        interactions_per_user=5))
        self.graphs = build_graphs(self.dataset)
        self.network = CrossDomainNetwork(60, (40, 40), dim=4, layers=1)
        self.network.reset_parameters(torch.Generator().manual_seed(0))

    def test_one_row_per_group_and_user(self):
        path = export_representations(self.network, self.graphs, 50, 1, Path(self.tmp.name) / 'reps.tsv')
        frame = pd.read_csv(path, sep='\t')
        self.assertEqual(len(frame), 150)
        self.assertEqual(list(frame.columns), ['group', 'user_index', 'dim_0', 'dim_1', 'dim_2', 'dim_3'])
        self.assertEqual(sorted(frame['group'].unique()), ['h_s_B', 'h_t_A', 'h_t_B'])
        geometry = json.loads((Path(self.tmp.name) / 'reps.geometry.json').read_text())
        self.assertEqual(len(geometry['pairs']), 3)

    def test_same_seed_gives_identical_files(self):
        first = export_representations(self.network, self.graphs, 20, 4, Path(self.tmp.name) / 'one.tsv')
        second = export_representations(self.network, self.graphs, 20, 4, Path(self.tmp.name) / 'two.tsv')
        self.assertEqual(first.read_bytes(), second.read_bytes())

    def test_specific_a_is_optional(self):
        path = export_representations(self.network, self.graphs, 10, 0, Path(self.tmp.name) / 'reps.tsv',
                                      include_specific_a=True)
        self.assertEqual(len(pd.read_csv(path, sep='\t')), 40)

    def test_oversampling_raises(self):
        with self.assertRaises(SamplingError):
            export_representations(self.network, self.graphs, 61, 0, Path(self.tmp.name) / 'reps.tsv')

    def test_attention_dump_rows_are_probability_vectors(self):
        candidates = {d: build_candidate_sets(self.dataset, d, seed=0, num_negatives=10) for d in (A, B)}
        scorer = NetworkScorer(self.network, self.graphs, attention=True)
        path = dump_attention({A: scorer, B: scorer}, candidates, Path(self.tmp.name) / 'attention.tsv', batch_users=16)
        frame = pd.read_csv(path, sep='\t')
        self.assertEqual(len(frame), 120)
        totals = frame[['w_cross', 'w_invariant', 'w_specific']].sum(axis=1)
        np.testing.assert_allclose(totals, 1.0, atol=1e-5)

    def test_network_scorer_matches_oracle_shape(self):
        candidates = build_candidate_sets(self.dataset, B, seed=0, num_negatives=10)
        metrics = evaluate_domain(NetworkScorer(self.network, self.graphs), B, candidates)
        self.assertEqual(metrics.user_count, 60)
        self.assertTrue(0.0 <= metrics.hr <= 100.0)
