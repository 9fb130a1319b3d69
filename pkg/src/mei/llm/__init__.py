"""Few-shot prompting pipeline for chat-completion models."""

from .client import BudgetExceeded, CassetteClient, ChatClient, ClientError, HttpChatClient
from .pipeline import HeadSingletonProvider, run_corpus, run_document, run_linking, run_single, run_two_stage

__all__ = [
    "BudgetExceeded", "CassetteClient", "ChatClient", "ClientError", "HttpChatClient",
    "HeadSingletonProvider", "run_corpus", "run_document", "run_linking", "run_single", "run_two_stage",
]
