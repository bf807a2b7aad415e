"""Dependency injection container for the qhom CLI."""

from __future__ import annotations

from dependency_injector import containers, providers

from .services import ChannelService, CorrelationService, HomService, HypergraphService
from .settings import RunSettings


class Container(containers.DeclarativeContainer):
    """Application container.

    ``config.run`` holds the merged config file and flag values; every
    service is built from the :class:`RunSettings` they describe.
    """

    config = providers.Configuration()
    settings = providers.Factory(RunSettings.from_mapping, config.run)
    channels = providers.Factory(ChannelService, settings)
    correlations = providers.Factory(CorrelationService, settings)
    hypergraphs = providers.Factory(HypergraphService, settings)
    homs = providers.Factory(HomService, settings)
