"""
Run directories and the run registry.

A run directory is named `<config hash[:12]>-s<seed>` and holds
manifest.json, config.json, trainlog.jsonl, evals.jsonl, timings.jsonl,
report.json and checkpoints/. Every file listed in the manifest exists.
"""
import json
import logging
import shutil
from pathlib import Path

from django.utils import timezone

from config.core.serializer_utils import write_json
from interactions.models import PreparedDataset
from training.models import EvaluationRecord, TrainingRun
from training.serializers import RunManifestSerializer

logger = logging.getLogger(__name__)

TRAIN_LOG = 'trainlog.jsonl'
EVAL_LOG = 'evals.jsonl'
TIMINGS = 'timings.jsonl'
REPORT = 'report.json'
CONFIG = 'config.json'
MANIFEST = 'manifest.json'


def _append_line(path: Path, data: dict):
    with path.open('a', encoding='utf-8') as handle:
        handle.write(json.dumps(data, sort_keys=True) + '\n')


class RunRecorder:
    """
    Writes the artifacts of one run and mirrors its progress into the
    TrainingRun / EvaluationRecord tables. `scoped(domain)` returns a
    recorder for one direction of a per-direction retraining: same files,
    tagged lines, checkpoints under `checkpoints/direction_<D>/`.
    """
    def __init__(self, run_dir: Path, run: TrainingRun, config, *, dataset_fingerprint: str, scope=None):
        self.run_dir = Path(run_dir)
        self.run = run
        self.config = config
        self.dataset_fingerprint = dataset_fingerprint
        self.scope = scope

    @classmethod
    def open(cls, runs_dir, config, *, command: str, dataset_manifest: dict) -> 'RunRecorder':
        """Starts (or restarts) the run directory and registry row for `config`."""
        run_dir = Path(runs_dir) / config.run_key
        if run_dir.exists():
            shutil.rmtree(run_dir)
        run_dir.mkdir(parents=True)
        write_json(run_dir / CONFIG, config.to_dict())

        fingerprint = dataset_manifest['fingerprint']
        run, _ = TrainingRun.objects.update_or_create(
            run_key=config.run_key,
            defaults={
                'command': command,
                'ablation': config.ablation,
                'seed': config.seed,
                'config': config.to_dict(),
                'config_hash': config.hash,
                'dataset': PreparedDataset.objects.filter(fingerprint=fingerprint).first(),
                'run_dir': str(run_dir),
                'status': TrainingRun.Status.RUNNING,
                'target_domain': config.target_domain,
                'started_at': timezone.now(),
                'finished_at': None,
                'best_epoch': None,
                'best_hr': None,
                'best_ndcg': None,
            },
        )
        run.evaluations.all().delete()
        recorder = cls(run_dir, run, config, dataset_fingerprint=fingerprint)
        recorder.write_manifest()
        logger.info('Run %s started in %s', config.run_key, run_dir)
        return recorder

    def scoped(self, domain) -> 'RunRecorder':
        return RunRecorder(self.run_dir, self.run, self.config,
                           dataset_fingerprint=self.dataset_fingerprint, scope=domain)

    def _tag(self, data: dict) -> dict:
        if self.scope is not None:
            data['direction'] = self.scope.value
        return data

    def checkpoint_dir(self, name: str) -> Path:
        root = self.run_dir / 'checkpoints'
        if self.scope is not None:
            root = root / f'direction_{self.scope.value}'
        return root / name

    def on_step(self, record):
        _append_line(self.run_dir / TRAIN_LOG, self._tag(record.to_dict()))

    def on_eval(self, report):
        _append_line(self.run_dir / EVAL_LOG, self._tag(report.to_dict()))
        for domain, metrics in report.domains.items():
            if self.scope is not None and domain != self.scope:
                continue
            EvaluationRecord.objects.update_or_create(
                run=self.run, epoch=report.epoch, domain=domain.value,
                defaults={'hr': metrics.hr, 'ndcg': metrics.ndcg, 'users': metrics.user_count},
            )

    def on_timing(self, epoch: int, seconds: float):
        _append_line(self.run_dir / TIMINGS, self._tag({'epoch': epoch, 'seconds': seconds}))

    def artifacts(self) -> list:
        return sorted(
            str(path.relative_to(self.run_dir)) for path in self.run_dir.rglob('*')
            if path.is_file() and path != self.run_dir / MANIFEST
        )

    def write_manifest(self):
        manifest = RunManifestSerializer(data={
            'run_key': self.run.run_key,
            'command': self.run.command,
            'config': self.config.to_dict(),
            'config_hash': self.config.hash,
            'dataset_fingerprint': self.dataset_fingerprint,
            'seed': self.config.seed,
            'started_at': self.run.started_at,
            'finished_at': self.run.finished_at,
            'status': self.run.status,
            'artifacts': self.artifacts() + [MANIFEST],
        })
        manifest.is_valid(raise_exception=True)
        write_json(self.run_dir / MANIFEST, manifest.validated_data)

    def finish(self, result, extra_report: dict = None):
        report = result.best_report.to_dict()
        report['best_epoch'] = result.best_epoch
        report.update(extra_report or {})
        write_json(self.run_dir / REPORT, report)

        target = result.best_report.metrics(self.config.target_domain)
        self.run.status = TrainingRun.Status.FINISHED
        self.run.finished_at = timezone.now()
        self.run.best_epoch = result.best_epoch
        self.run.best_hr = target.hr
        self.run.best_ndcg = target.ndcg
        self.run.save()
        self.write_manifest()
        logger.info('Run %s finished: best epoch %s', self.run.run_key, result.best_epoch)

    def fail(self, exc: Exception):
        self.run.status = TrainingRun.Status.FAILED
        self.run.finished_at = timezone.now()
        self.run.save()
        self.write_manifest()
        logger.error('Run %s failed: %s', self.run.run_key, exc)
