# Generated by Django 5.2.5 on 2026-10-19 09:12

import django.core.validators
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='PreparedDataset',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('fingerprint', models.CharField(max_length=64, unique=True)),
                ('path', models.CharField(max_length=1024)),
                ('source', models.CharField(choices=[('files', 'Delimited files'), ('synthetic', 'Synthetic')], max_length=16)),
                ('seed', models.IntegerField()),
                ('user_count', models.PositiveIntegerField(validators=[django.core.validators.MinValueValidator(1)])),
                ('item_count_a', models.PositiveIntegerField()),
                ('item_count_b', models.PositiveIntegerField()),
                ('train_size_a', models.PositiveIntegerField()),
                ('train_size_b', models.PositiveIntegerField()),
                ('test_size_a', models.PositiveIntegerField()),
                ('test_size_b', models.PositiveIntegerField()),
                ('num_negatives', models.PositiveIntegerField(default=999)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at'],
            },
        ),
    ]
