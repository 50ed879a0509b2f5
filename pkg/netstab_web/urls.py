"""
URL configuration for netstab_web project.

Solo expone la API JSON de análisis; el resto del trabajo se hace con
`python manage.py netstab ...`.
"""
from django.urls import path

from netstab.views.api.network_api import NetworkAnalyzeAPIView, StructuralSetsAPIView

urlpatterns = [
    path("api/networks/analyze/", NetworkAnalyzeAPIView.as_view(), name="network_analyze_api"),
    path("api/networks/structural-sets/", StructuralSetsAPIView.as_view(), name="structural_sets_api"),
]
