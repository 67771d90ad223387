import io
import json
import tempfile
from pathlib import Path

import numpy as np
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag
from rest_framework.exceptions import ValidationError

from config.core.exceptions import DataFormatError, SamplingError
from .models import PreparedDataset
from .services.loaders import check_preset, leave_one_out, load_interactions
from .services.sampling import build_candidate_sets, sample_training_negatives
from .services.storage import read_dataset
from .services.synthesis import generate_latents, synthesize_dataset
from .services.types import Domain, DomainDataset, SyntheticSpec

A, B = Domain.A, Domain.B


def _write(directory, name, text):
    path = Path(directory) / name
    path.write_text(text)
    return path


class DomainDatasetTests(SimpleTestCase):
    def test_rejects_test_rows_seen_in_train(self):
        with self.assertRaises(DataFormatError):
            DomainDataset(2, (3, 3), {A: [[0, 1]], B: [[0, 0]]}, {A: [[0, 1]], B: []})

    def test_rejects_duplicate_pairs(self):
        with self.assertRaises(DataFormatError):
            DomainDataset(2, (3, 3), {A: [[0, 1], [0, 1]], B: [[0, 0]]}, {A: [], B: []})

    def test_rejects_out_of_range_items(self):
        with self.assertRaises(DataFormatError):
            DomainDataset(2, (3, 3), {A: [[0, 3]], B: [[0, 0]]}, {A: [], B: []})

    def test_user_item_sets_cover_train_and_test(self):
        dataset = DomainDataset(2, (3, 3), {A: [[0, 1], [1, 2]], B: [[0, 0]]}, {A: [[0, 2]], B: []})
        self.assertEqual(dataset.user_item_sets[A][0], frozenset({1, 2}))
        self.assertEqual(dataset.train_counts[A].tolist(), [1, 1])


class LoaderTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def test_leave_one_out_by_hand(self):
        rows = ''.join(f'u{u}\t{d}{i}\t{d}\n' for u in range(3) for d in ('x', 'y') for i in range(2))
        path = _write(self.tmp.name, 'all.tsv', 'user_id\titem_id\tdomain\n' + rows)
        dataset = load_interactions([path])
        for domain in (A, B):
            self.assertEqual(len(dataset.train(domain)), 3)
            self.assertEqual(len(dataset.test(domain)), 3)
            self.assertEqual(sorted(dataset.test(domain)[:, 0].tolist()), [0, 1, 2])

    def test_last_interaction_is_held_out(self):
        train, test = leave_one_out(np.array([[0, 5], [0, 3], [1, 2], [0, 9]]))
        self.assertEqual(test.tolist(), [[0, 9]])
        self.assertEqual(train.tolist(), [[0, 5], [0, 3], [1, 2]])

    def test_reindexing_is_a_bijection(self):
        a = _write(self.tmp.name, 'a.tsv', 'user_id\titem_id\nbob\tk1\nann\tk2\nbob\tk3\n')
        b = _write(self.tmp.name, 'b.tsv', 'user_id\titem_id\nann\tz9\nbob\tz1\n')
        dataset = load_interactions([a, b])
        self.assertEqual(dataset.user_ids.tolist(), ['ann', 'bob'])
        decoded = {(dataset.user_ids[u], dataset.item_ids[A][i]) for u, i in np.concatenate([dataset.train(A), dataset.test(A)])}
        self.assertEqual(decoded, {('bob', 'k1'), ('ann', 'k2'), ('bob', 'k3')})

    def test_duplicates_are_dropped(self):
        a = _write(self.tmp.name, 'a.tsv', 'user_id\titem_id\nu\ti1\nu\ti1\nu\ti2\n')
        b = _write(self.tmp.name, 'b.tsv', 'user_id\titem_id\nu\tj1\n')
        dataset = load_interactions([a, b])
        self.assertEqual(len(dataset.train(A)) + len(dataset.test(A)), 2)

    def test_empty_file(self):
        a = _write(self.tmp.name, 'a.tsv', '')
        b = _write(self.tmp.name, 'b.tsv', 'user_id\titem_id\nu\tj1\n')
        with self.assertRaisesMessage(DataFormatError, 'no interactions'):
            load_interactions([a, b])

    def test_malformed_row_reports_its_line(self):
        a = _write(self.tmp.name, 'a.tsv', 'user_id\titem_id\nu\ti1\nu\ti2\textra\n')
        b = _write(self.tmp.name, 'b.tsv', 'user_id\titem_id\nu\tj1\n')
        with self.assertRaises(DataFormatError) as caught:
            load_interactions([a, b])
        self.assertIsNotNone(caught.exception.line)
        self.assertIn('line', str(caught.exception))

    def test_users_missing_from_one_domain_are_counted(self):
        a = _write(self.tmp.name, 'a.tsv', 'user_id\titem_id\nu\ti1\nv\ti2\nw\ti3\n')
        b = _write(self.tmp.name, 'b.tsv', 'user_id\titem_id\nu\tj1\n')
        with self.assertRaisesMessage(DataFormatError, '2 users appear only in domain A and 0 only in domain B'):
            load_interactions([a, b])

    def test_explicit_test_split(self):
        a = _write(self.tmp.name, 'a.tsv', 'user_id\titem_id\nu\ti1\nu\ti2\n')
        b = _write(self.tmp.name, 'b.tsv', 'user_id\titem_id\nu\tj1\nu\tj2\n')
        ta = _write(self.tmp.name, 'ta.tsv', 'user_id\titem_id\nu\ti2\n')
        tb = _write(self.tmp.name, 'tb.tsv', 'user_id\titem_id\nu\tj3\n')
        dataset = load_interactions([a, b], test_paths=[ta, tb])
        self.assertEqual(len(dataset.train(A)), 1)
        self.assertEqual(len(dataset.train(B)), 2)
        self.assertEqual(dataset.item_ids[B][dataset.test(B)[0, 1]], 'j3')

    def test_preset_mismatches_are_listed(self):
        dataset = DomainDataset(2, (3, 3), {A: [[0, 1]], B: [[0, 0]]}, {A: [], B: []})
        mismatches = check_preset(dataset, 'sport_cloth')
        self.assertTrue(any('users' in line for line in mismatches))


class SynthesisTests(SimpleTestCase):
    def test_same_seed_gives_identical_datasets(self):
        spec = SyntheticSpec(user_count=50, item_counts=(30, 40), interactions_per_user=5, seed=3)
        first, second = synthesize_dataset(spec), synthesize_dataset(spec)
        for domain in (A, B):
            self.assertEqual(first.train(domain).tobytes(), second.train(domain).tobytes())
            self.assertEqual(first.test(domain).tobytes(), second.test(domain).tobytes())

    def test_every_user_holds_out_one_item_per_domain(self):
        dataset = synthesize_dataset(SyntheticSpec(user_count=40, item_counts=(30, 30), interactions_per_user=6))
        for domain in (A, B):
            self.assertEqual(len(dataset.test(domain)), 40)
            self.assertEqual(len(dataset.train(domain)), 40 * 5)

    def test_full_sharing_gives_identical_latents(self):
        latents = generate_latents(SyntheticSpec(shared_strength=1.0, exclusive_strength=0.0))
        self.assertTrue(np.array_equal(latents.users[A], latents.users[B]))

    def test_no_sharing_gives_uncorrelated_preferences(self):
        latents = generate_latents(SyntheticSpec(user_count=1000, shared_strength=0.0, exclusive_strength=0.0))
        r = np.corrcoef(latents.users[A].ravel(), latents.users[B].ravel())[0, 1]
        self.assertLess(abs(r), 0.05)

    def test_strength_outside_unit_interval_is_rejected(self):
        with self.assertRaises(ValidationError):
            synthesize_dataset(SyntheticSpec(shared_strength=1.5))


class SamplingTests(SimpleTestCase):
    def setUp(self):
        self.dataset = DomainDataset(
            user_count=2,
            item_counts=(6, 3),
            train_interactions={A: [[0, 0], [0, 1], [1, 2]], B: [[0, 0], [0, 1], [1, 0], [1, 1], [1, 2]]},
            test_interactions={A: [[0, 2]], B: []},
        )

    def test_one_negative_per_positive(self):
        rng = np.random.default_rng(0)
        rows = sample_training_negatives(self.dataset, A, [[0, 0], [0, 1], [1, 2], [0, 2]], 1, rng)
        self.assertEqual(rows.shape, (8, 3))
        self.assertEqual(int(rows[:, 2].sum()), 4)
        for user, item, label in rows:
            if label == 0:
                self.assertNotIn(item, self.dataset.user_item_sets[A][user])

    def test_last_free_item_is_forced(self):
        rows = sample_training_negatives(self.dataset, B, [[0, 0]], 3, np.random.default_rng(1))
        self.assertEqual(rows[1:, 1].tolist(), [2, 2, 2])

    def test_saturated_user_cannot_be_sampled(self):
        with self.assertRaises(SamplingError):
            sample_training_negatives(self.dataset, B, [[1, 0]], 1, np.random.default_rng(0))

    def test_ratio_must_be_positive(self):
        with self.assertRaises(SamplingError):
            sample_training_negatives(self.dataset, A, [[0, 0]], 0, np.random.default_rng(0))

    @tag('slow')
    def test_negatives_are_uniform_over_eligible_items(self):
        # user 1 in domain A: items 0, 1, 3, 4, 5 are eligible
        rng = np.random.default_rng(7)
        rows = sample_training_negatives(self.dataset, A, [[1, 2]] * 5000, 2, rng)
        negatives = rows[rows[:, 2] == 0, 1]
        counts = np.bincount(negatives, minlength=6)
        self.assertEqual(counts[2], 0)
        expected = len(negatives) / 5
        sigma = np.sqrt(len(negatives) * 0.2 * 0.8)
        for item in (0, 1, 3, 4, 5):
            self.assertLess(abs(counts[item] - expected), 4 * sigma)

    def test_candidate_sets_are_disjoint_from_user_items(self):
        dataset = synthesize_dataset(SyntheticSpec(user_count=30, item_counts=(120, 120), interactions_per_user=5))
        for domain in (A, B):
            for candidate in build_candidate_sets(dataset, domain, seed=4, num_negatives=99):
                negatives = set(candidate.negatives)
                self.assertEqual(len(negatives), 99)
                self.assertFalse(negatives & dataset.user_item_sets[domain][candidate.user_index])
                self.assertNotIn(candidate.positive_item, negatives)

    def test_candidate_sets_are_reproducible(self):
        dataset = synthesize_dataset(SyntheticSpec(user_count=20, item_counts=(60, 60), interactions_per_user=4))
        self.assertEqual(build_candidate_sets(dataset, A, seed=2, num_negatives=30),
                         build_candidate_sets(dataset, A, seed=2, num_negatives=30))

    def test_exhaustive_pool_uses_every_other_item(self):
        dataset = DomainDataset(1, (1000, 2), {A: [], B: [[0, 0]]}, {A: [[0, 17]], B: []})
        (candidate,) = build_candidate_sets(dataset, A, seed=0)
        self.assertEqual(len(candidate.negatives), 999)
        self.assertEqual(set(candidate.negatives), set(range(1000)) - {17})

    def test_users_without_enough_negatives_are_skipped(self):
        self.assertEqual(build_candidate_sets(self.dataset, A, seed=0, num_negatives=999), [])


class PrepareCommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _prepare(self, out, *extra):
        call_command('prepare', '--synthetic', '--users', '40', '--items-a', '150', '--items-b', '150',
                     '--interactions-per-user', '5', '--num-negatives', '99', '--out', str(out), *extra,
                     stdout=io.StringIO())

    def test_manifest_records_the_seed(self):
        out = Path(self.tmp.name) / 'data'
        self._prepare(out, '--seed', '7')
        manifest = json.loads((out / 'manifest.json').read_text())
        self.assertEqual(manifest['seed'], 7)
        self.assertEqual(manifest['candidate_counts'], {'A': 40, 'B': 40})
        self.assertEqual(PreparedDataset.objects.get().seed, 7)

    def test_rerun_reproduces_the_fingerprint(self):
        first, second = Path(self.tmp.name) / 'one', Path(self.tmp.name) / 'two'
        self._prepare(first, '--seed', '3')
        self._prepare(second, '--seed', '3')
        fingerprint = lambda path: json.loads((path / 'manifest.json').read_text())['fingerprint']
        self.assertEqual(fingerprint(first), fingerprint(second))
        self.assertEqual(PreparedDataset.objects.count(), 1)

    def test_prepared_directory_reads_back(self):
        out = Path(self.tmp.name) / 'data'
        self._prepare(out, '--seed', '1')
        dataset, candidates, manifest = read_dataset(out)
        self.assertEqual(dataset.user_count, 40)
        self.assertEqual(len(candidates[A][0].negatives), 99)
        self.assertEqual(manifest['num_negatives'], 99)

    def test_source_is_required(self):
        with self.assertRaises(CommandError) as caught:
            call_command('prepare', '--out', self.tmp.name, stdout=io.StringIO())
        self.assertEqual(caught.exception.returncode, 1)

    def test_conflicting_sources(self):
        with self.assertRaises(CommandError) as caught:
            call_command('prepare', '--synthetic', '--input', 'x.tsv', '--out', self.tmp.name)
        self.assertEqual(caught.exception.returncode, 1)

    def test_invalid_strength_is_a_validation_error(self):
        with self.assertRaises(CommandError) as caught:
            call_command('prepare', '--synthetic', '--shared', '2', '--out', self.tmp.name)
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn('shared_strength', str(caught.exception))
