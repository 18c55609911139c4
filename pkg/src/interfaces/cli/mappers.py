"""
Mappers for converting between domain entities and CLI documents.
Keeps the domain layer free of the JSON layout used on disk.
"""
import numpy as np

from ...domain.entities.measurement_model import Ensemble, EnsembleKind, MeasurementModel
from ...domain.entities.signal_instance import GeneratorKind, SignalGenerator, SignalInstance
from ...domain.entities.unrolled_network import UnrolledNetwork
from ...application.services.signal_service import measurements_from_matrix
from .schemas import NetworkCheckpoint, SignalDocument


class SignalMapper:
    """Mapper between SignalInstance / MeasurementModel and SignalDocument."""

    @staticmethod
    def entity_to_document(signal: SignalInstance, model: MeasurementModel = None) -> SignalDocument:
        ensemble = {}
        if model is not None:
            ensemble = {"kind": model.ensemble.kind.value, "seed": model.ensemble.seed, **model.ensemble.params}
        return SignalDocument(
            d=signal.d,
            m=None if model is None else model.m,
            seed=signal.generator.seed,
            generator={"kind": signal.generator.kind.value, **signal.generator.params},
            ensemble=ensemble,
            x=signal.x.tolist(),
            y=None if model is None else model.y.tolist(),
        )

    @staticmethod
    def document_to_entity(document: SignalDocument) -> SignalInstance:
        params = dict(document.generator)
        kind = GeneratorKind(params.pop("kind", GeneratorKind.CUSTOM.value))
        return SignalInstance(
            x=np.asarray(document.x, dtype=float),
            generator=SignalGenerator(kind=kind, params=params, seed=document.seed),
        )

    @staticmethod
    def document_to_model(document: SignalDocument, matrix: np.ndarray) -> MeasurementModel:
        """Rebuild y = M x + e for a stored signal; the noise is what y leaves over."""
        signal = SignalMapper.document_to_entity(document)
        if document.y is None:
            return measurements_from_matrix(signal, matrix)
        M = np.asarray(matrix, dtype=float)
        y = np.asarray(document.y, dtype=float)
        params = dict(document.ensemble)
        kind = EnsembleKind(params.pop("kind", EnsembleKind.CUSTOM.value))
        seed = params.pop("seed", None)
        return MeasurementModel(
            matrix=M,
            noise=y - M @ signal.x,
            y=y,
            ensemble=Ensemble(kind=kind, params=params, seed=seed),
            signal=signal,
        )


class NetworkMapper:
    """Mapper between UnrolledNetwork and NetworkCheckpoint."""

    @staticmethod
    def entity_to_checkpoint(network: UnrolledNetwork) -> NetworkCheckpoint:
        return NetworkCheckpoint(
            A=network.A.tolist(),
            U=network.U.tolist(),
            lam=network.lam,
            T=network.layers,
            nonlinearity=network.nonlinearity,
            k=network.k,
            radius=network.radius,
        )

    @staticmethod
    def checkpoint_to_entity(checkpoint: NetworkCheckpoint) -> UnrolledNetwork:
        return UnrolledNetwork(
            A=np.asarray(checkpoint.A, dtype=float),
            U=np.asarray(checkpoint.U, dtype=float),
            nonlinearity=checkpoint.nonlinearity,
            layers=checkpoint.T,
            lam=checkpoint.lam,
            k=checkpoint.k,
            radius=checkpoint.radius,
        )
