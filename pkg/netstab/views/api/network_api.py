"""
API JSON de análisis de redes.
Recibe el texto de una red (formato `network` / `node` / `update`) y devuelve
el reporte de estabilidad o los conjuntos estructurales.

Respuesta: {"ok": true, "report": {...}} o {"ok": false, "error": "..."}
"""
from __future__ import annotations

import json
import logging

from django.conf import settings
from rest_framework import status
from rest_framework.parsers import JSONParser
from rest_framework.response import Response
from rest_framework.throttling import ScopedRateThrottle
from rest_framework.views import APIView

from netstab.authentication import HasAPIKeyOrOpen, NetstabAPIKeyAuthentication
from netstab.services.errors import NetstabError
from netstab.services.network import interaction_graph, parse_network_file
from netstab.services.reports import stability_model, structural_sets_model
from netstab.services.stability import analyze
from netstab.services.structural import find_structural_sets

logger = logging.getLogger(__name__)

DEFAULT_MAX_NETWORK_BYTES = 256 * 1024


def _error(message, code=status.HTTP_400_BAD_REQUEST):
    return Response({"ok": False, "error": message}, status=code)


class _NetworkAPIView(APIView):
    authentication_classes = [NetstabAPIKeyAuthentication]
    permission_classes = [HasAPIKeyOrOpen]
    throttle_classes = [ScopedRateThrottle]
    throttle_scope = "analysis"
    parser_classes = [JSONParser]
    log_name = "netstab_api"

    def read_network(self, request):
        """(red, None) o (None, respuesta de error)."""
        text = request.data.get("network") if hasattr(request.data, "get") else None
        if not isinstance(text, str) or not text.strip():
            logger.warning("%s missing network", self.log_name)
            return None, _error("Falta el texto de la red. Envía {\"network\": \"...\"} en JSON.")
        limit = int(getattr(settings, "NETSTAB_MAX_NETWORK_BYTES", DEFAULT_MAX_NETWORK_BYTES))
        size = len(text.encode("utf-8"))
        if size > limit:
            logger.warning("%s network too large size=%d limit=%d", self.log_name, size, limit)
            return None, _error(
                f"La red ocupa {size} bytes; el máximo es {limit}.",
                status.HTTP_413_REQUEST_ENTITY_TOO_LARGE,
            )
        try:
            return parse_network_file(text), None
        except NetstabError as exc:
            logger.warning("%s invalid network error=%s", self.log_name, exc)
            return None, _error(str(exc))


class NetworkAnalyzeAPIView(_NetworkAPIView):
    """
    POST /api/networks/analyze/
    - network: texto de la red

    Devuelve el StabilityReport (schema netstab-report/1) en "report".
    """
    log_name = "network_analyze"

    def post(self, request, *args, **kwargs):
        net, failure = self.read_network(request)
        if failure is not None:
            return failure
        logger.info("network_analyze processing name=%s n=%d T=%d", net.name, net.size, net.T)
        try:
            report = analyze(net)
        except NetstabError as exc:
            logger.warning("network_analyze failed name=%s error=%s", net.name, exc)
            return _error(str(exc))
        payload = json.loads(stability_model(report).to_json())
        logger.info("network_analyze success name=%s rho=%.6g verdict=%s", net.name, report.rho, report.verdict)
        return Response({"ok": True, "report": payload}, status=status.HTTP_200_OK)


class StructuralSetsAPIView(_NetworkAPIView):
    """
    POST /api/networks/structural-sets/
    - network: texto de la red
    - basic: (opcional) solo conjuntos básicos
    - max_results: (opcional) por defecto 10
    """
    log_name = "structural_sets"

    def post(self, request, *args, **kwargs):
        net, failure = self.read_network(request)
        if failure is not None:
            return failure
        want_basic = bool(request.data.get("basic", False))
        try:
            max_results = int(request.data.get("max_results", 10))
        except (TypeError, ValueError):
            return _error("max_results debe ser un entero.")
        try:
            reports = find_structural_sets(interaction_graph(net), want_basic=want_basic, max_results=max_results)
        except NetstabError as exc:
            logger.warning("structural_sets failed name=%s error=%s", net.name, exc)
            return _error(str(exc))
        payload = json.loads(structural_sets_model(net.name, reports).to_json())
        logger.info("structural_sets success name=%s results=%d", net.name, len(reports))
        return Response({"ok": True, "report": payload}, status=status.HTTP_200_OK)
