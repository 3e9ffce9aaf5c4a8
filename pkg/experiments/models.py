from django.db import models


class SimulationRun(models.Model):
	STATUS_PENDING = 'pending'
	STATUS_PROCESSING = 'processing'
	STATUS_COMPLETED = 'completed'
	STATUS_FAILED = 'failed'

	STATUS_CHOICES = [
		(STATUS_PENDING, 'Pending'),
		(STATUS_PROCESSING, 'Processing'),
		(STATUS_COMPLETED, 'Completed'),
		(STATUS_FAILED, 'Failed'),
	]

	KIND_CHOICES = [
		('inject', 'Injection'),
		('moments', 'Moments'),
		('shadows', 'Shadows'),
		('imaging', 'Imaging'),
	]

	kind = models.CharField(max_length=20, choices=KIND_CHOICES, db_index=True)
	subcommand = models.CharField(max_length=40)
	config = models.JSONField(default=dict, blank=True)
	seed = models.BigIntegerField(null=True, blank=True)
	status = models.CharField(max_length=20, choices=STATUS_CHOICES, default=STATUS_PENDING, db_index=True)
	results = models.JSONField(default=dict, blank=True)
	output_path = models.CharField(max_length=500, blank=True)
	error_message = models.TextField(blank=True)
	created_at = models.DateTimeField(auto_now_add=True, db_index=True)
	updated_at = models.DateTimeField(auto_now=True)

	class Meta:
		ordering = ['-created_at']

	def __str__(self):
		return f'SimulationRun {self.id} {self.kind} {self.subcommand} ({self.status})'

	@classmethod
	def start(cls, run_config):
		"""Create a processing record for a resolved RunConfig."""
		return cls.objects.create(
			kind=run_config.command,
			subcommand=run_config.subcommand,
			config=run_config.as_dict(),
			seed=run_config.seed,
			status=cls.STATUS_PROCESSING,
		)

	def complete(self, results, output_path=''):
		self.results = results
		self.output_path = str(output_path or '')
		self.status = self.STATUS_COMPLETED
		self.save(update_fields=['results', 'output_path', 'status', 'updated_at'])

	def fail(self, exc):
		self.error_message = str(exc)
		self.status = self.STATUS_FAILED
		self.save(update_fields=['error_message', 'status', 'updated_at'])
