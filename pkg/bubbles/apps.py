from django.apps import AppConfig


class BubblesConfig(AppConfig):
    name = 'bubbles'
    verbose_name = 'Half-wave multi-bubble numerics'

    def ready(self):
        import bubbles.cache_signals  # noqa: F401
