import logging

from django.apps import AppConfig

logger = logging.getLogger(__name__)


class NetstabConfig(AppConfig):
    name = "netstab"
    default_auto_field = "django.db.models.BigAutoField"

    def ready(self):
        logger.info("netstab ready: aplicación cargada")
