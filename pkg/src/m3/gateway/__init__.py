from .config import GatewayConfig, load_config
from .service import create_app
from .store import SessionStore, StoredSession

__all__ = ["GatewayConfig", "load_config", "create_app", "SessionStore", "StoredSession"]
