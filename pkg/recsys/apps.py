from django.apps import AppConfig
from django.conf import settings


class RecsysConfig(AppConfig):
    name = 'recsys'
    verbose_name = 'Disentangled cross-domain model'

    def ready(self):
        import torch

        torch.set_num_threads(settings.TORCH_NUM_THREADS)
