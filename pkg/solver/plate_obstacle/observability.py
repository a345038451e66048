"""
Tracing Configuration

This module initializes an OpenTelemetry tracer provider for the solver. Spans are
emitted around assembly, factorizations, preconditioner setup, PDAS steps and
experiment cells. Without initialization the API's no-op tracer is used.
"""

from opentelemetry import trace as trace_api
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor, ConsoleSpanExporter
from typing import Optional
import logging

logger = logging.getLogger(__name__)


class SolverObservability:
    """Manages tracer provider initialization and shutdown"""

    def __init__(self):
        self.tracer_provider: Optional[TracerProvider] = None
        self._initialized = False

    def initialize(
        self,
        project_name: str = "plate-obstacle",
        endpoint: Optional[str] = None,
        console: bool = False
    ):
        """
        Initialize tracing

        Args:
            project_name: Service name attached to every span
            endpoint: OTLP endpoint URL (None to skip the OTLP exporter)
            console: Whether to print finished spans to stdout
        """
        if self._initialized:
            logger.warning("Tracing already initialized, skipping re-initialization")
            return

        try:
            provider = TracerProvider(resource=Resource.create({"service.name": project_name}))

            if endpoint:
                from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter

                logger.info(f"Registering OTLP span exporter at: {endpoint}")
                provider.add_span_processor(BatchSpanProcessor(OTLPSpanExporter(endpoint=endpoint)))

            if console:
                logger.info("Registering console span exporter")
                provider.add_span_processor(BatchSpanProcessor(ConsoleSpanExporter()))

            trace_api.set_tracer_provider(provider)
            self.tracer_provider = provider
            self._initialized = True
            logger.info(f"Tracing initialized for project: {project_name}")

        except Exception as e:
            logger.error(f"Failed to initialize tracing: {str(e)}")
            # Don't raise - solver runs fine without tracing

    def shutdown(self):
        """Flush pending spans and release the provider"""
        if self.tracer_provider:
            try:
                logger.info("Flushing pending traces...")
                self.tracer_provider.force_flush(timeout_millis=5000)
                self.tracer_provider.shutdown()
            except Exception as e:
                logger.error(f"Error flushing traces: {str(e)}")

        self._initialized = False

    def is_initialized(self) -> bool:
        """Check if tracing is initialized"""
        return self._initialized

    def get_tracer(self, name: str = __name__):
        """Get an OpenTelemetry tracer for custom spans"""
        return trace_api.get_tracer(name)


# Global instance
solver_observability = SolverObservability()


def get_tracer(name: str = __name__):
    """Convenience function to get a tracer"""
    return solver_observability.get_tracer(name)
