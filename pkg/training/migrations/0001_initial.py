# Generated by Django 5.2.5 on 2026-10-19 10:03

import django.db.models.deletion
import django.utils.timezone
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
        ('interactions', '0001_initial'),
    ]

    operations = [
        migrations.CreateModel(
            name='TrainingRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('run_key', models.CharField(max_length=80, unique=True)),
                ('command', models.CharField(max_length=16)),
                ('ablation', models.CharField(choices=[('full', 'Full model'), ('inter_only', 'Inter Only'), ('intra_inter', 'Intra and Inter'), ('wo_tafc', 'wo TAFC')], default='full', max_length=16)),
                ('seed', models.IntegerField()),
                ('config', models.JSONField()),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('run_dir', models.CharField(max_length=1024)),
                ('status', models.CharField(choices=[('running', 'Running'), ('finished', 'Finished'), ('failed', 'Failed')], default='running', max_length=16)),
                ('target_domain', models.CharField(choices=[('A', 'A'), ('B', 'B')], default='B', max_length=1)),
                ('started_at', models.DateTimeField(default=django.utils.timezone.now)),
                ('finished_at', models.DateTimeField(blank=True, null=True)),
                ('best_epoch', models.PositiveIntegerField(blank=True, null=True)),
                ('best_hr', models.FloatField(blank=True, null=True)),
                ('best_ndcg', models.FloatField(blank=True, null=True)),
                ('dataset', models.ForeignKey(blank=True, null=True, on_delete=django.db.models.deletion.SET_NULL, related_name='runs', to='interactions.prepareddataset')),
            ],
            options={
                'ordering': ['-started_at'],
            },
        ),
        migrations.CreateModel(
            name='EvaluationRecord',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('epoch', models.PositiveIntegerField()),
                ('domain', models.CharField(choices=[('A', 'A'), ('B', 'B')], max_length=1)),
                ('hr', models.FloatField()),
                ('ndcg', models.FloatField()),
                ('users', models.PositiveIntegerField()),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='evaluations', to='training.trainingrun')),
            ],
            options={
                'ordering': ['run', 'epoch', 'domain'],
                'constraints': [models.UniqueConstraint(fields=('run', 'epoch', 'domain'), name='unique_evaluation_per_epoch')],
            },
        ),
    ]
