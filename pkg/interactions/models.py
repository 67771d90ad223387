from django.core.validators import MinValueValidator
from django.db import models


class PreparedDataset(models.Model):
    """
    Registry row for a dataset directory written by `prepare`.
    The fingerprint is the digest of the emitted row files.
    """
    class Source(models.TextChoices):
        FILES = 'files', 'Delimited files'
        SYNTHETIC = 'synthetic', 'Synthetic'

    fingerprint = models.CharField(max_length=64, unique=True)
    path = models.CharField(max_length=1024)
    source = models.CharField(max_length=16, choices=Source.choices)
    seed = models.IntegerField()
    user_count = models.PositiveIntegerField(validators=[MinValueValidator(1)])
    item_count_a = models.PositiveIntegerField()
    item_count_b = models.PositiveIntegerField()
    train_size_a = models.PositiveIntegerField()
    train_size_b = models.PositiveIntegerField()
    test_size_a = models.PositiveIntegerField()
    test_size_b = models.PositiveIntegerField()
    num_negatives = models.PositiveIntegerField(default=999)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at']

    def __str__(self):
        return f'{self.source} dataset {self.fingerprint[:12]} ({self.user_count} users)'
