from django.db import models
from django.utils import timezone

from interactions.models import PreparedDataset
from .config import Ablation


class TrainingRun(models.Model):
    """
    Registry row for one run directory (`<config hash[:12]>-s<seed>`).
    Reruns of the same config and seed reuse the row.
    """
    class Status(models.TextChoices):
        RUNNING = 'running', 'Running'
        FINISHED = 'finished', 'Finished'
        FAILED = 'failed', 'Failed'

    run_key = models.CharField(max_length=80, unique=True)
    command = models.CharField(max_length=16)
    ablation = models.CharField(max_length=16, choices=Ablation.choices, default=Ablation.FULL)
    seed = models.IntegerField()
    config = models.JSONField()
    config_hash = models.CharField(max_length=64, db_index=True)
    dataset = models.ForeignKey(PreparedDataset, on_delete=models.SET_NULL, null=True, blank=True, related_name='runs')
    run_dir = models.CharField(max_length=1024)
    status = models.CharField(max_length=16, choices=Status.choices, default=Status.RUNNING)
    target_domain = models.CharField(max_length=1, choices=[('A', 'A'), ('B', 'B')], default='B')
    started_at = models.DateTimeField(default=timezone.now)
    finished_at = models.DateTimeField(null=True, blank=True)
    best_epoch = models.PositiveIntegerField(null=True, blank=True)
    best_hr = models.FloatField(null=True, blank=True)
    best_ndcg = models.FloatField(null=True, blank=True)

    class Meta:
        ordering = ['-started_at']

    def __str__(self):
        return f'{self.run_key} ({self.ablation}, {self.status})'


class EvaluationRecord(models.Model):
    run = models.ForeignKey(TrainingRun, on_delete=models.CASCADE, related_name='evaluations')
    epoch = models.PositiveIntegerField()
    domain = models.CharField(max_length=1, choices=[('A', 'A'), ('B', 'B')])
    hr = models.FloatField()
    ndcg = models.FloatField()
    users = models.PositiveIntegerField()

    class Meta:
        ordering = ['run', 'epoch', 'domain']
        constraints = [
            models.UniqueConstraint(fields=['run', 'epoch', 'domain'], name='unique_evaluation_per_epoch'),
        ]

    def __str__(self):
        return f'{self.run.run_key} epoch {self.epoch} {self.domain}: HR {self.hr:.2f}'
