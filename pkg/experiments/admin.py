from django.contrib import admin

from injection.tasks import run_sweep_point
from .models import SimulationRun


@admin.register(SimulationRun)
class SimulationRunAdmin(admin.ModelAdmin):
    """
    Browse recorded experiment runs with their resolved configs and results.
    """
    list_display = (
        'id',
        'kind',
        'subcommand',
        'seed',
        'status',
        'created_at',
        'updated_at',
    )

    search_fields = ('subcommand', 'error_message')

    list_filter = (
        'kind',
        'status',
        'created_at',
    )

    readonly_fields = (
        'config',
        'seed',
        'results',
        'output_path',
        'error_message',
        'created_at',
        'updated_at',
    )

    date_hierarchy = 'created_at'

    fieldsets = (
        ('Invocation', {
            'fields': ('kind', 'subcommand', 'seed', 'config')
        }),
        ('Outcome', {
            'fields': ('status', 'results', 'output_path', 'error_message')
        }),
        ('Timestamps', {
            'fields': ('created_at', 'updated_at')
        }),
    )

    actions = ['mark_pending']

    def mark_pending(self, request, queryset):
        """
        Reset selected runs to pending and re-dispatch injection sweep points.
        Other kinds only run from their management command.
        """
        points = list(queryset.filter(kind='inject', subcommand='point').values_list('id', flat=True))
        updated = queryset.update(status=SimulationRun.STATUS_PENDING, error_message='')
        for run_id in points:
            run_sweep_point.delay(run_id)
        self.message_user(request, f'{updated} run(s) reset to pending, {len(points)} sweep point(s) re-dispatched.')
    mark_pending.short_description = 'Reset to pending and re-dispatch sweep points'
