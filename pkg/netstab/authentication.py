"""
Autenticación opcional por API key para la API de análisis.
El cliente envía la clave en header: Authorization: Bearer <key> o X-API-Key: <key>.
Si NETSTAB_API_KEY está vacía la API queda abierta.
"""
import logging

from django.conf import settings
from rest_framework import authentication, exceptions
from rest_framework.permissions import BasePermission

logger = logging.getLogger(__name__)


def configured_api_key():
    return (getattr(settings, "NETSTAB_API_KEY", None) or "").strip()


class NetstabAPIKeyAuthentication(authentication.BaseAuthentication):
    """
    Acepta la clave en:
      - Authorization: Bearer <api_key>
      - X-API-Key: <api_key>
    Sin clave configurada no autentica a nadie (devuelve None) y el permiso deja pasar.
    """
    keyword = "Bearer"

    def authenticate(self, request):
        expected = configured_api_key()
        if not expected:
            return None

        auth_header = request.META.get("HTTP_AUTHORIZATION")
        if auth_header:
            parts = auth_header.split()
            if len(parts) == 2 and parts[0] == self.keyword and parts[1].strip() == expected:
                return (None, parts[1].strip())

        api_key = request.META.get("HTTP_X_API_KEY", "").strip()
        if api_key and api_key == expected:
            return (None, api_key)

        logger.warning("netstab_api auth failed: invalid or missing key path=%s", request.path)
        raise exceptions.AuthenticationFailed(
            "Clave de API inválida o faltante. Envía Authorization: Bearer <key> o X-API-Key: <key>."
        )

    def authenticate_header(self, request):
        return self.keyword


class HasAPIKeyOrOpen(BasePermission):
    """Acceso libre sin clave configurada; con clave, exige que la autenticación haya pasado."""

    def has_permission(self, request, view):
        if not configured_api_key():
            return True
        return request.auth is not None
