from django.core.management.base import CommandError

from config.core.commands import PipelineCommand
from training.services.gradcheck import run_all


class Command(PipelineCommand):
    help = 'Compare every loss gradient with central finite differences on tiny random instances.'

    def run(self, **options):
        seed = options['seed'] if options['seed'] is not None else 0
        results = run_all(seed)
        width = max(len(result.name) for result in results)
        for result in results:
            line = f'{result.name:<{width}}  worst relative error {result.worst_error:.3e} (< {result.tolerance:g})'
            style = self.style.SUCCESS if result.passed else self.style.ERROR
            self.stdout.write(style(f"{'ok  ' if result.passed else 'FAIL'} {line}"))
        failed = [result.name for result in results if not result.passed]
        if failed:
            raise CommandError(f"gradient check failed: {', '.join(failed)}", returncode=2)
