import io
import json
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
import torch
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, tag
from rest_framework.exceptions import ValidationError

from config.core.exceptions import DimensionError, TrainingAborted
from interactions.services.sampling import build_candidate_sets, sample_training_negatives
from interactions.services.synthesis import synthesize_dataset
from interactions.services.types import DOMAINS, Domain, SyntheticSpec
from recsys.encoders import encode_full
from recsys.network import CrossDomainNetwork
from .config import Ablation, TrainingConfig
from .models import EvaluationRecord, TrainingRun
from .serializers import TrainingConfigSerializer
from .services.checkpoints import load_checkpoint, read_checkpoint_manifest, save_checkpoint
from .services.config_loader import load_training_config
from .services.gradcheck import check_dc_mmd_median, run_all
from .services.objective import StepRecord, TrainLog, total_loss
from .services.sweeps import expand_configs, parse_grid, summarize
from .services.trainer import Trainer, fit, frozen

A, B = Domain.A, Domain.B

SMALL = dict(d=8, layers=1, batch_size=64, epochs=2, eval_every=1, club_inner_steps=2, seed=3)


def _small_data():
    dataset = synthesize_dataset(SyntheticSpec(user_count=60, item_counts=(40, 40), latent_dim=4,
                                               interactions_per_user=5, seed=1))
    candidates = {d: build_candidate_sets(dataset, d, seed=1, num_negatives=20) for d in DOMAINS}
    return dataset, candidates


def _clone(parameters):
    return [p.detach().clone() for p in parameters]


def _assert_unchanged(test, before, parameters):
    for old, new in zip(before, parameters):
        test.assertTrue(torch.equal(old, new.detach()))


class ConfigTests(SimpleTestCase):
    def test_total_loss(self):
        self.assertEqual(total_loss(1.0, 2.0, 3.0, 4.0, alpha=1.0), 10.0)
        self.assertEqual(total_loss(1.0, 2.0, 3.0, 4.0, alpha=0.5), 9.0)
        self.assertEqual(total_loss(0.0, 0.0, 0.0, 0.0, alpha=1.0), 0.0)

    def test_step_record_total_is_recomputed(self):
        record = StepRecord.from_terms(epoch=1, step=0, ce=torch.tensor(1.0), dcmmd=torch.tensor(2.0),
                                       mi=0.0, rec=0.5, alpha=0.25)
        self.assertEqual(record.total, 2.0)

    def test_epoch_means(self):
        log = TrainLog(steps=[StepRecord(1, 0, 1.0, 0.0, 0.0, 0.0, 1.0), StepRecord(1, 1, 3.0, 0.0, 0.0, 0.0, 3.0),
                              StepRecord(2, 2, 5.0, 0.0, 0.0, 0.0, 5.0)])
        self.assertEqual(log.epoch_means(1)['ce'], 2.0)
        self.assertEqual(log.epoch_means(3), {})

    def test_defaults(self):
        config = TrainingConfigSerializer(data={})
        self.assertTrue(config.is_valid())
        config = config.to_config()
        self.assertEqual((config.d, config.layers, config.learning_rate, config.batch_size), (128, 2, 0.002, 1024))
        self.assertEqual((config.beta_a, config.beta_b, config.gamma_a, config.gamma_b), (1e-4, 9e-4, 0.01, 0.09))

    def test_negative_weight_names_the_field(self):
        serializer = TrainingConfigSerializer(data={'beta_a': -1})
        self.assertFalse(serializer.is_valid())
        self.assertIn('beta_a', serializer.errors)

    def test_unknown_field_is_rejected(self):
        serializer = TrainingConfigSerializer(data={'bta_a': 0.1})
        self.assertFalse(serializer.is_valid())
        self.assertIn('bta_a', serializer.errors)

    def test_zero_epochs_is_rejected(self):
        serializer = TrainingConfigSerializer(data={'epochs': 0})
        self.assertFalse(serializer.is_valid())
        self.assertIn('epochs', serializer.errors)

    def test_non_positive_kernel_is_rejected(self):
        serializer = TrainingConfigSerializer(data={'kernel_multipliers': [1.0, 0.0]})
        self.assertFalse(serializer.is_valid())
        self.assertIn('kernel_multipliers', serializer.errors)

    def test_reversal_scale_must_be_positive(self):
        serializer = TrainingConfigSerializer(data={'grl_scale': 0})
        self.assertFalse(serializer.is_valid())
        self.assertIn('grl_scale', serializer.errors)
        with self.assertRaises(ValueError):
            TrainingConfig(grl_scale=0.0)

    def test_dataclass_checks_weights_too(self):
        with self.assertRaises(ValueError):
            TrainingConfig(gamma_b=-0.1)

    def test_hash_ignores_the_seed(self):
        base = TrainingConfig()
        self.assertEqual(base.hash, base.replace(seed=9).hash)
        self.assertNotEqual(base.hash, base.replace(beta_b=1e-3).hash)
        self.assertNotEqual(base.run_key, base.replace(seed=9).run_key)

    def test_ablation_flags(self):
        self.assertFalse(TrainingConfig(ablation='inter_only').flags.mutual_information)
        self.assertTrue(TrainingConfig(ablation='intra_inter').flags.mutual_information)
        self.assertFalse(TrainingConfig(ablation='intra_inter').flags.reconstruction)
        self.assertFalse(TrainingConfig(ablation='wo_tafc').flags.attention)
        self.assertTrue(TrainingConfig().flags.attention)

    def test_file_values_are_overridden_by_flags(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'config.json'
            path.write_text(json.dumps({'d': 16, 'epochs': 3}))
            config = load_training_config(path, {'epochs': 5, 'alpha': None})
        self.assertEqual((config.d, config.epochs, config.alpha), (16, 5, 1.0))


class TrainerTests(SimpleTestCase):
    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset, cls.candidates = _small_data()

    def _trainer(self, **changes):
        return Trainer(self.dataset, self.candidates, TrainingConfig(**{**SMALL, **changes}))

    def _positives(self):
        return {d: self.dataset.train(d)[:64] for d in DOMAINS}

    def test_inter_only_has_no_disentanglement_terms(self):
        result = self._trainer(ablation='inter_only', epochs=1).fit()
        self.assertTrue(all(r.mi == 0.0 and r.rec == 0.0 for r in result.log.steps))
        self.assertTrue(all(r.dcmmd > 0.0 for r in result.log.steps))

    def test_same_seed_gives_identical_logs(self):
        first = self._trainer().fit()
        second = self._trainer().fit()
        self.assertEqual([r.to_dict() for r in first.log.steps], [r.to_dict() for r in second.log.steps])
        self.assertEqual(first.best_report.to_dict(), second.best_report.to_dict())

    def test_steps_per_epoch_follows_the_larger_domain(self):
        self.assertEqual(self._trainer().steps_per_epoch, 4)
        self.assertEqual(self._trainer(batch_size=1024).steps_per_epoch, 1)

    def test_inner_loop_only_moves_the_variational_heads(self):
        trainer = self._trainer(club_inner_steps=3)
        main_before = _clone(trainer.network.main_parameters())
        variational_before = _clone(trainer.network.variational_parameters())
        batch = encode_full(trainer.network, trainer.graphs).select(np.arange(20))
        trainer._fit_variational(batch)
        _assert_unchanged(self, main_before, trainer.network.main_parameters())
        moved = [not torch.equal(old, new) for old, new in zip(variational_before, trainer.network.variational_parameters())]
        self.assertTrue(any(moved))

    def test_outer_step_leaves_the_variational_heads_alone(self):
        trainer = self._trainer(club_inner_steps=0)
        variational_before = _clone(trainer.network.variational_parameters())
        trainer.train_step(self._positives())
        _assert_unchanged(self, variational_before, trainer.network.variational_parameters())
        self.assertTrue(all(p.requires_grad for p in trainer.network.variational_parameters()))

    def test_zero_auxiliary_weights_reduce_to_cross_entropy(self):
        trainer = self._trainer(alpha=0.0, beta_a=0.0, beta_b=0.0, gamma_a=0.0, gamma_b=0.0)
        positives = self._positives()
        labelled = {d: sample_training_negatives(self.dataset, d, positives[d], 1, np.random.default_rng(0))
                    for d in DOMAINS}
        users = np.unique(np.concatenate([positives[d][:, 0] for d in DOMAINS]))
        parameters = trainer.network.main_parameters()
        with frozen(trainer.network.variational_parameters()):
            full = encode_full(trainer.network, trainer.graphs)
            terms, _ = trainer._loss_terms(full, full.select(users), labelled, users)
            total = total_loss(terms['ce'], terms['dcmmd'], terms['mi'], terms['rec'], 0.0)
            total_grads = torch.autograd.grad(total, parameters, retain_graph=True, allow_unused=True)
            ce_grads = torch.autograd.grad(terms['ce'], parameters, allow_unused=True)
        for parameter, from_total, from_ce in zip(parameters, total_grads, ce_grads):
            from_total = torch.zeros_like(parameter) if from_total is None else from_total
            from_ce = torch.zeros_like(parameter) if from_ce is None else from_ce
            torch.testing.assert_close(from_total, from_ce)

    def test_single_user_batch_skips_mutual_information(self):
        train = {d: self.dataset.train(d) for d in DOMAINS}
        user = min(set(train[A][:, 0]) & set(train[B][:, 0]))
        positives = {d: train[d][train[d][:, 0] == user] for d in DOMAINS}
        trainer = self._trainer()
        variational_before = _clone(trainer.network.variational_parameters())
        record = trainer.train_step(positives)
        self.assertEqual(record.mi, 0.0)
        self.assertTrue(np.isfinite(record.total))
        _assert_unchanged(self, variational_before, trainer.network.variational_parameters())

    def test_evaluation_schedule(self):
        self.assertEqual(len(self._trainer(epochs=2, eval_every=2).fit().log.evaluations), 1)
        result = self._trainer(epochs=3, eval_every=2).fit()
        self.assertEqual([r.epoch for r in result.log.evaluations], [2, 3])
        for report in result.log.evaluations:
            for metrics in report.domains.values():
                self.assertLessEqual(metrics.ndcg, metrics.hr)

    def test_best_epoch_has_the_highest_target_hit_ratio(self):
        result = self._trainer(epochs=3, eval_every=1).fit()
        best = max(r.metrics(B).hr for r in result.log.evaluations)
        self.assertEqual(result.best_report.metrics(B).hr, best)
        self.assertEqual(result.best_report.epoch, result.best_epoch)

    def test_non_finite_loss_aborts(self):
        trainer = self._trainer(ablation='inter_only')
        with torch.no_grad():
            trainer.network.items['A'].weight.fill_(float('nan'))
        with self.assertRaises(TrainingAborted) as caught:
            trainer.train_step(self._positives())
        self.assertIn('none written yet', str(caught.exception))

    def test_per_direction_retraining_reports_each_target(self):
        result = fit(self.dataset, self.candidates, TrainingConfig(**{**SMALL, 'epochs': 1, 'retrain_per_direction': True}))
        self.assertEqual(set(result.directions), {A, B})
        self.assertEqual(result.best_report.metrics(A).hr, result.directions[A].best_report.metrics(A).hr)
        self.assertEqual(len(result.log.steps), 2 * 4)

    @tag('slow')
    def test_cross_entropy_drops_by_thirty_percent(self):
        dataset = synthesize_dataset(SyntheticSpec(user_count=500, item_counts=(200, 200), shared_strength=0.8, seed=1))
        candidates = {d: build_candidate_sets(dataset, d, seed=1, num_negatives=99) for d in DOMAINS}
        config = TrainingConfig(d=32, batch_size=256, learning_rate=0.005, epochs=30, eval_every=30,
                                club_inner_steps=1, seed=1)
        result = Trainer(dataset, candidates, config).fit()
        first, last = result.log.epoch_means(1)['ce'], result.log.epoch_means(30)['ce']
        self.assertLessEqual(last, 0.7 * first)


@tag('slow')
class SyntheticLearningTests(SimpleTestCase):
    SEEDS = (1, 2, 3, 4, 5)

    @classmethod
    def setUpClass(cls):
        super().setUpClass()
        cls.dataset = synthesize_dataset(SyntheticSpec(user_count=500, item_counts=(200, 200),
                                                       shared_strength=0.8, exclusive_strength=0.5, seed=1))
        cls.candidates = {d: build_candidate_sets(cls.dataset, d, seed=1, num_negatives=99) for d in DOMAINS}

    def _config(self, ablation, seed):
        return TrainingConfig(ablation=ablation, d=32, batch_size=256, learning_rate=0.005, epochs=30,
                              eval_every=30, club_inner_steps=1, seed=seed)

    def test_full_model_beats_random_embeddings_and_inter_only(self):
        baseline, final = [], {'full': [], 'inter_only': []}
        for seed in self.SEEDS:
            untrained = Trainer(self.dataset, self.candidates, self._config('full', seed))
            baseline.append(untrained.evaluate().metrics(B).hr)
            for variant, hits in final.items():
                result = Trainer(self.dataset, self.candidates, self._config(variant, seed)).fit()
                hits.append(result.log.evaluations[-1].metrics(B).hr)
        full, inter_only = np.mean(final['full']), np.mean(final['inter_only'])
        self.assertGreaterEqual(full, np.mean(baseline) + 5.0)
        self.assertGreaterEqual(full, inter_only)


class CheckpointTests(SimpleTestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)

    def _network(self, seed, dim=4):
        network = CrossDomainNetwork(5, (6, 7), dim=dim, layers=1)
        network.reset_parameters(torch.Generator().manual_seed(seed))
        return network

    def test_round_trip_restores_every_array(self):
        saved = self._network(0)
        save_checkpoint(saved, Path(self.tmp.name) / 'best', config_hash='f' * 64, epoch=3)
        restored = self._network(1)
        manifest = load_checkpoint(restored, Path(self.tmp.name) / 'best')
        self.assertEqual(manifest['epoch'], 3)
        for name, tensor in saved.state_dict().items():
            self.assertTrue(torch.equal(tensor, restored.state_dict()[name]))

    def test_manifest_lists_shapes(self):
        save_checkpoint(self._network(0), Path(self.tmp.name) / 'last', config_hash='a' * 64, epoch=1)
        manifest = read_checkpoint_manifest(Path(self.tmp.name) / 'last')
        self.assertEqual(manifest['arrays']['user_t.A.weight'], [5, 4])
        self.assertEqual(manifest['d'], 4)

    def test_dimension_mismatch_is_refused(self):
        save_checkpoint(self._network(0), Path(self.tmp.name) / 'best', config_hash='a' * 64, epoch=1)
        with self.assertRaises(DimensionError):
            load_checkpoint(self._network(0, dim=8), Path(self.tmp.name) / 'best')

    def test_optimizer_state_is_restored(self):
        network = self._network(0)
        optimizer = torch.optim.Adam(network.parameters(), lr=0.01)
        network.user_t['A'].weight.sum().backward()
        optimizer.step()
        save_checkpoint(network, Path(self.tmp.name) / 'last', config_hash='a' * 64, epoch=1,
                        optimizers={'main': optimizer})
        fresh = torch.optim.Adam(network.parameters(), lr=0.01)
        load_checkpoint(network, Path(self.tmp.name) / 'last', optimizers={'main': fresh})
        self.assertEqual(len(fresh.state_dict()['state']), len(optimizer.state_dict()['state']))


class GradcheckTests(SimpleTestCase):
    def test_every_gradient_matches_finite_differences(self):
        for result in run_all(seed=0):
            with self.subTest(result.name):
                self.assertTrue(result.passed, f'{result.name}: {result.worst_error:.3e}')


class GradcheckMedianKernelTests(SimpleTestCase):
    def test_median_bandwidth_gradient_matches_finite_differences(self):
        for seed in (0, 1):
            result = check_dc_mmd_median(seed)
            with self.subTest(seed=seed):
                self.assertTrue(result.passed, f'{result.name}: {result.worst_error:.3e}')

    def test_run_all_includes_the_default_kernel(self):
        self.assertIn('dc_mmd (median bandwidths)', [result.name for result in run_all(seed=0)])


class SweepTests(SimpleTestCase):
    def test_parse_grid(self):
        self.assertEqual(parse_grid(['learning_rate=0.00175, 0.002', 'd=64']),
                         {'learning_rate': ['0.00175', '0.002'], 'd': ['64']})
        self.assertEqual(parse_grid(None), {})
        with self.assertRaises(ValueError):
            parse_grid(['learning_rate'])

    def test_expand_crosses_variants_grid_and_seeds(self):
        configs = list(expand_configs(TrainingConfig(), ['full', 'inter_only'], [1, 2, 3],
                                      {'learning_rate': ['0.00175', '0.002']}))
        self.assertEqual(len(configs), 12)
        self.assertEqual({c.learning_rate for _, _, c in configs}, {0.00175, 0.002})
        self.assertEqual({c.ablation for _, _, c in configs}, {Ablation.FULL.value, Ablation.INTER_ONLY.value})

    def test_grid_values_are_validated(self):
        with self.assertRaises(ValidationError):
            list(expand_configs(TrainingConfig(), ['full'], [1], {'beta_a': ['-1']}))

    def test_summary_uses_sample_standard_deviation(self):
        results = pd.DataFrame({
            'variant': ['full', 'full', 'inter_only'],
            'seed': [1, 2, 1],
            'run_key': ['x', 'y', 'z'],
            'hr_A': [10.0, 20.0, 5.0], 'ndcg_A': [1.0, 1.0, 1.0],
            'hr_B': [30.0, 30.0, 7.0], 'ndcg_B': [2.0, 4.0, 3.0],
        })
        summary = summarize(results).set_index('variant')
        self.assertEqual(summary.loc['full', 'hr_A_mean'], 15.0)
        self.assertAlmostEqual(summary.loc['full', 'hr_A_std'], np.sqrt(50.0))
        self.assertEqual(summary.loc['inter_only', 'hr_A_std'], 0.0)
        self.assertEqual(summary.loc['full', 'seeds'], 2)


class PipelineCommandTests(TestCase):
    def setUp(self):
        self.tmp = Path(tempfile.mkdtemp())
        self.addCleanup(shutil.rmtree, self.tmp, ignore_errors=True)
        self.data = self.tmp / 'data'
        self.runs = self.tmp / 'runs'
        call_command('prepare', '--synthetic', '--users', '40', '--items-a', '60', '--items-b', '60',
                     '--latent-dim', '4', '--interactions-per-user', '5', '--num-negatives', '20',
                     '--seed', '1', '--out', str(self.data), stdout=io.StringIO())

    def _train(self, *extra):
        out = io.StringIO()
        call_command('train', '--data', str(self.data), '--out', str(self.runs), '--d', '8', '--layers', '1',
                     '--batch-size', '64', '--epochs', '2', '--eval-every', '1', '--club-inner-steps', '1',
                     *extra, stdout=out)
        return out.getvalue()

    def test_train_records_the_run(self):
        output = self._train('--seed', '2')
        run = TrainingRun.objects.get()
        self.assertIn(run.run_key, output)
        self.assertEqual(run.status, TrainingRun.Status.FINISHED)
        self.assertEqual(run.dataset.user_count, 40)
        self.assertEqual(EvaluationRecord.objects.filter(run=run).count(), 4)

        run_dir = Path(run.run_dir)
        manifest = json.loads((run_dir / 'manifest.json').read_text())
        for artifact in manifest['artifacts']:
            self.assertTrue((run_dir / artifact).exists(), artifact)
        self.assertIn('checkpoints/best/manifest.json', manifest['artifacts'])
        self.assertEqual(len((run_dir / 'trainlog.jsonl').read_text().splitlines()), 2 * 3)

    def test_eval_writes_a_report(self):
        self._train()
        run_dir = Path(TrainingRun.objects.get().run_dir)
        output = io.StringIO()
        call_command('eval', '--run', str(run_dir), '--data', str(self.data),
                     '--export-reps', str(self.tmp / 'reps.tsv'), '--sample-size', '10', stdout=output)
        report = json.loads((run_dir / 'eval_report.json').read_text())
        self.assertEqual(set(report['domains']), {'A', 'B'})
        self.assertTrue(report['sparsity'])
        self.assertEqual(len(pd.read_csv(self.tmp / 'reps.tsv', sep='\t')), 30)
        self.assertIn('HR@10', output.getvalue())

    def test_negative_weight_is_a_usage_error(self):
        with self.assertRaises(CommandError) as caught:
            self._train('--beta-a', '-1')
        self.assertEqual(caught.exception.returncode, 1)
        self.assertIn('beta_a', str(caught.exception))
        self.assertFalse(TrainingRun.objects.exists())

    def test_runs_are_filtered_by_variant(self):
        self._train('--ablation', 'inter_only')
        listing = io.StringIO()
        call_command('runs', '--ablation', 'inter_only', stdout=listing)
        self.assertIn(TrainingRun.objects.get().run_key, listing.getvalue())
        listing = io.StringIO()
        call_command('runs', '--ablation', 'full', stdout=listing)
        self.assertIn('No runs match.', listing.getvalue())

    def test_runs_json_includes_evaluations(self):
        self._train()
        listing = io.StringIO()
        call_command('runs', '--json', stdout=listing)
        (run,) = json.loads(listing.getvalue())
        self.assertEqual(len(run['evaluations']), 4)

    def test_ablate_records_every_variant_and_seed(self):
        output = io.StringIO()
        summary_path = self.tmp / 'summary.tsv'
        call_command('ablate', '--data', str(self.data), '--out', str(self.runs), '--seeds', '1,2',
                     '--variants', 'inter_only', 'full', '--d', '8', '--layers', '1', '--batch-size', '64',
                     '--epochs', '1', '--eval-every', '1', '--club-inner-steps', '1',
                     '--summary-out', str(summary_path), stdout=output)
        self.assertIn('inter_only', output.getvalue())
        self.assertIn('full', output.getvalue())
        self.assertIn('4 runs over seeds', output.getvalue())
        runs = TrainingRun.objects.filter(command='ablate')
        self.assertEqual(runs.count(), 4)
        self.assertEqual(runs.filter(ablation='inter_only').count(), 2)
        summary = pd.read_csv(summary_path, sep='\t')
        self.assertEqual(list(summary['variant']), ['inter_only', 'full'])
        self.assertEqual(list(summary['seeds']), [2, 2])

    def test_gradcheck_command_passes(self):
        output = io.StringIO()
        call_command('gradcheck', stdout=output)
        self.assertNotIn('FAIL', output.getvalue())
