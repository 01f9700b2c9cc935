from .client import EngineClient, ServiceError

__all__ = ["EngineClient", "ServiceError"]
