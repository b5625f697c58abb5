"""Context-chain ledger with consensus-governed deletion of whole chains."""

from .consensus import (
    Decision,
    DecisionState,
    DeletionRequest,
    EndorsementPolicy,
    EndorserStrategy,
    ErasureMode,
    ErasurePlan,
    GuardianRegistry,
    Membership,
    PolicyMode,
    Vote,
    VoteDecision,
    apply_deletion,
    evaluate,
    open_deletion_request,
    plan_erasure,
    select_endorsers,
)
from .core import (
    Block,
    ContextChain,
    Identity,
    IdentityKind,
    LedgerTree,
    Scope,
    Transaction,
    VerificationReport,
    Violation,
    hash_block,
    make_genesis,
    tree_bytes,
    verify_tree,
)
from .placement import (
    AffectedChains,
    PlacementResult,
    canonicalize_scope,
    chains_affected_by,
    find_chain,
    max_branch_count,
    place_transaction,
)

__version__ = "0.1.0"
