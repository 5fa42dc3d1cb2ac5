"""personamem: personalized long-term conversational agent engine."""

from .config import EngineConfig, LiveBackendConfig
from .engine import Engine, TurnResult, tick_clock
from .gateway import (
    AgentRequest,
    AgentResponse,
    CallRecorder,
    EmbeddingVector,
    HttpGateway,
    MockGateway,
    build_gateway,
    input_digest,
)
from .memory import LinkUpdateReport, MemoryRecord, MemoryStore, Summary, Turn
from .pipeline import (
    AgentTrace,
    CannedWebSearch,
    HttpWebSearch,
    RouteDecision,
    ToolCall,
    ValidatorVerdict,
    coordinate,
    execute_turn,
    operate,
    respond,
    validate,
)
from .profile import (
    PROFILE_CATEGORIES,
    ProfileDelta,
    ProfileFact,
    UserProfile,
    apply_delta,
    init_profile,
    propose_delta,
)
from .retrieval import (
    EvidenceBundle,
    ExpandedQuery,
    Hit,
    RetrievalResult,
    expand_query,
    format_evidence,
    retrieve,
)
from .storage import UserState, UserStorage

__version__ = "0.1.0"

__all__ = [
    "AgentRequest",
    "AgentResponse",
    "AgentTrace",
    "CallRecorder",
    "CannedWebSearch",
    "EmbeddingVector",
    "Engine",
    "EngineConfig",
    "EvidenceBundle",
    "ExpandedQuery",
    "Hit",
    "HttpGateway",
    "HttpWebSearch",
    "LinkUpdateReport",
    "LiveBackendConfig",
    "MemoryRecord",
    "MemoryStore",
    "MockGateway",
    "PROFILE_CATEGORIES",
    "ProfileDelta",
    "ProfileFact",
    "RetrievalResult",
    "RouteDecision",
    "Summary",
    "ToolCall",
    "Turn",
    "TurnResult",
    "UserProfile",
    "UserState",
    "UserStorage",
    "ValidatorVerdict",
    "apply_delta",
    "build_gateway",
    "coordinate",
    "execute_turn",
    "expand_query",
    "format_evidence",
    "init_profile",
    "input_digest",
    "operate",
    "propose_delta",
    "respond",
    "retrieve",
    "tick_clock",
    "validate",
]
