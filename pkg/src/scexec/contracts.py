"""Benchmark smart contracts as atomic units over flattened shared state.

An atomic unit (AU) is a contract method invocation.  Its body runs against
an *execution context* exposing ``read(key)`` and ``write(key, value)``;
the miner hands it an STM transaction, validators hand it raw state.  Every
map-valued contract variable is flattened to one key per entry.

Business-logic failures (insufficient funds, low bid, double vote) do not
raise: the unit finishes with outcome ``FAILED`` and performs no writes.
"""

import random
from dataclasses import dataclass, field

from .stm import ConfigurationError

OK = "OK"
FAILED = "FAILED"

COIN = "coin"
BALLOT = "ballot"
AUCTION = "auction"
ARITH = "arith"
MIXED = "mixed"

BENCHMARKS = (COIN, BALLOT, AUCTION, MIXED)

_ALIASES = {
    "coin": COIN,
    "ballot": BALLOT,
    "auction": AUCTION,
    "simpleauction": AUCTION,
    "simple_auction": AUCTION,
    "arith": ARITH,
    "mixed": MIXED,
}


def canonical_contract(name):
    try:
        return _ALIASES[name.lower().replace("-", "_")]
    except KeyError:
        raise ConfigurationError(f"unknown contract {name!r}") from None


@dataclass(frozen=True)
class AtomicUnit:
    au_id: int
    contract: str
    method: str
    params: tuple = ()

    def run(self, ctx):
        return execute(self, ctx)

    def __str__(self):
        args = ", ".join(map(str, self.params))
        return f"AU{self.au_id}:{self.contract}.{self.method}({args})"


@dataclass
class Workload:
    aus: list
    initial_state: dict
    contract: str = MIXED
    n_objects: int = 0
    seed: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def keys(self):
        return sorted(self.initial_state)

    def __len__(self):
        return len(self.aus)


class StateContext:
    """Direct, non-transactional access to a state dict."""

    def __init__(self, state):
        self.state = state

    def read(self, key):
        try:
            return self.state[key]
        except KeyError:
            raise ConfigurationError(f"unknown shared object {key!r}") from None

    def write(self, key, value):
        if key not in self.state:
            raise ConfigurationError(f"unknown shared object {key!r}")
        self.state[key] = value


class TrackingContext(StateContext):
    """StateContext that also remembers which keys were read and written."""

    def __init__(self, state):
        super().__init__(state)
        self.reads = set()
        self.writes = set()

    def read(self, key):
        if key not in self.writes:
            self.reads.add(key)
        return super().read(key)

    def write(self, key, value):
        super().write(key, value)
        self.writes.add(key)


# --- Coin ------------------------------------------------------------------

def coin_key(acct):
    return f"coin.{acct}"


def _coin_send(ctx, sender, receiver, amount):
    if sender == receiver or amount < 0:
        return FAILED
    src = ctx.read(coin_key(sender))
    dst = ctx.read(coin_key(receiver))
    if src < amount:
        return FAILED
    ctx.write(coin_key(sender), src - amount)
    ctx.write(coin_key(receiver), dst + amount)
    return OK


def _coin_get_balance(ctx, acct):
    ctx.read(coin_key(acct))
    return OK


def _coin_mint(ctx, acct, amount):
    bal = ctx.read(coin_key(acct))
    ctx.write(coin_key(acct), bal + amount)
    return OK


def coin_send(au_id, sender, receiver, amount):
    if sender == receiver:
        raise ValueError("sender and receiver must differ")
    return AtomicUnit(au_id, COIN, "send", (sender, receiver, amount))


def coin_get_balance(au_id, acct):
    return AtomicUnit(au_id, COIN, "get_balance", (acct,))


def coin_mint(au_id, acct, amount):
    return AtomicUnit(au_id, COIN, "mint", (acct, amount))


def coin_layout(n_accounts, balance=100):
    return {coin_key(a): balance for a in range(n_accounts)}


# --- Ballot ----------------------------------------------------------------

def voter_key(voter, attr):
    return f"ballot.voter.{voter}.{attr}"


def proposal_key(p):
    return f"ballot.proposal.{p}"


def _ballot_vote(ctx, voter, proposal):
    if ctx.read(voter_key(voter, "voted")):
        return FAILED
    weight = ctx.read(voter_key(voter, "weight"))
    if weight == 0:
        return FAILED
    count = ctx.read(proposal_key(proposal))
    ctx.write(voter_key(voter, "voted"), 1)
    ctx.write(voter_key(voter, "vote"), proposal + 1)
    ctx.write(proposal_key(proposal), count + weight)
    return OK


def _ballot_delegate(ctx, voter, to):
    if voter == to or ctx.read(voter_key(voter, "voted")):
        return FAILED
    weight = ctx.read(voter_key(voter, "weight"))
    if weight == 0:
        return FAILED
    # one hop only: the delegate must not have delegated in turn
    if ctx.read(voter_key(to, "delegate")):
        return FAILED
    if ctx.read(voter_key(to, "voted")):
        p = ctx.read(voter_key(to, "vote")) - 1
        ctx.write(proposal_key(p), ctx.read(proposal_key(p)) + weight)
    else:
        ctx.write(voter_key(to, "weight"), ctx.read(voter_key(to, "weight")) + weight)
    ctx.write(voter_key(voter, "voted"), 1)
    ctx.write(voter_key(voter, "delegate"), to + 1)
    return OK


def _ballot_give_right(ctx, voter):
    if ctx.read(voter_key(voter, "voted")) or ctx.read(voter_key(voter, "weight")):
        return FAILED
    ctx.write(voter_key(voter, "weight"), 1)
    return OK


def _ballot_winner(ctx, n_proposals):
    # the tally is a query result, not block state; only the reads matter
    for p in range(n_proposals):
        ctx.read(proposal_key(p))
    return OK


def ballot_winner_of(state, n_proposals):
    counts = [state[proposal_key(p)] for p in range(n_proposals)]
    return max(range(n_proposals), key=lambda p: (counts[p], -p))


def ballot_vote(au_id, voter, proposal):
    return AtomicUnit(au_id, BALLOT, "vote", (voter, proposal))


def ballot_delegate(au_id, voter, to):
    return AtomicUnit(au_id, BALLOT, "delegate", (voter, to))


def ballot_give_right(au_id, voter):
    return AtomicUnit(au_id, BALLOT, "give_right", (voter,))


def ballot_winner(au_id, n_proposals):
    return AtomicUnit(au_id, BALLOT, "winner", (n_proposals,))


def ballot_layout(n_voters, n_proposals, rights=None):
    """``rights``: voters holding a vote at genesis (default: all)."""
    rights = set(range(n_voters)) if rights is None else set(rights)
    state = {}
    for v in range(n_voters):
        state[voter_key(v, "weight")] = 1 if v in rights else 0
        state[voter_key(v, "voted")] = 0
        state[voter_key(v, "vote")] = 0
        state[voter_key(v, "delegate")] = 0
    for p in range(n_proposals):
        state[proposal_key(p)] = 0
    return state


def ballot_split(n_objects):
    n_proposals = max(2, n_objects // 4)
    return max(2, n_objects - n_proposals), n_proposals


# --- SimpleAuction ---------------------------------------------------------

AUCTION_END = "auction.end"
HIGHEST_BIDDER = "auction.highest_bidder"
HIGHEST_BID = "auction.highest_bid"


def pending_key(bidder):
    return f"auction.pending.{bidder}"


def balance_key(bidder):
    return f"auction.balance.{bidder}"


def _auction_bid(ctx, bidder, value, now):
    if now >= ctx.read(AUCTION_END):
        return FAILED
    highest = ctx.read(HIGHEST_BID)
    if value <= highest:
        return FAILED
    if highest != 0:
        prev = ctx.read(HIGHEST_BIDDER) - 1
        ctx.write(pending_key(prev), ctx.read(pending_key(prev)) + highest)
    ctx.write(HIGHEST_BIDDER, bidder + 1)
    ctx.write(HIGHEST_BID, value)
    return OK


def _auction_withdraw(ctx, bidder):
    amount = ctx.read(pending_key(bidder))
    if amount > 0:
        ctx.write(pending_key(bidder), 0)
        ctx.write(balance_key(bidder), ctx.read(balance_key(bidder)) + amount)
    return OK


def auction_bid(au_id, bidder, value):
    return AtomicUnit(au_id, AUCTION, "bid", (bidder, value))


def auction_withdraw(au_id, bidder):
    return AtomicUnit(au_id, AUCTION, "withdraw", (bidder,))


def auction_layout(n_bidders, end):
    """``end`` is the logical closing time: bids from AUs with id >= end fail."""
    state = {AUCTION_END: end, HIGHEST_BIDDER: 0, HIGHEST_BID: 0}
    for b in range(n_bidders):
        state[pending_key(b)] = 0
        state[balance_key(b)] = 0
    return state


# --- Arith (two-line demo contract) ----------------------------------------

def arith_key(i):
    return f"arith.{i}"


def _arith_add(ctx, i, k):
    ctx.write(arith_key(i), ctx.read(arith_key(i)) + k)
    return OK


def _arith_mul(ctx, i, k):
    ctx.write(arith_key(i), ctx.read(arith_key(i)) * k)
    return OK


def arith_add(au_id, i, k):
    return AtomicUnit(au_id, ARITH, "add", (i, k))


def arith_mul(au_id, i, k):
    return AtomicUnit(au_id, ARITH, "mul", (i, k))


def arith_layout(n):
    return {arith_key(i): 0 for i in range(n)}


_METHODS = {
    (COIN, "send"): _coin_send,
    (COIN, "get_balance"): _coin_get_balance,
    (COIN, "mint"): _coin_mint,
    (BALLOT, "vote"): _ballot_vote,
    (BALLOT, "delegate"): _ballot_delegate,
    (BALLOT, "give_right"): _ballot_give_right,
    (BALLOT, "winner"): _ballot_winner,
    (AUCTION, "bid"): _auction_bid,
    (AUCTION, "withdraw"): _auction_withdraw,
    (ARITH, "add"): _arith_add,
    (ARITH, "mul"): _arith_mul,
}

_ARITY = {
    (COIN, "send"): 3, (COIN, "get_balance"): 1, (COIN, "mint"): 2,
    (BALLOT, "vote"): 2, (BALLOT, "delegate"): 2, (BALLOT, "give_right"): 1,
    (BALLOT, "winner"): 1, (AUCTION, "bid"): 2, (AUCTION, "withdraw"): 1,
    (ARITH, "add"): 2, (ARITH, "mul"): 2,
}


def method_exists(contract, method, n_params=None):
    sig = (contract, method)
    return sig in _METHODS and (n_params is None or _ARITY[sig] == n_params)


def execute(au, ctx):
    """Run ``au`` against ``ctx`` and return OK or FAILED."""
    fn = _METHODS.get((au.contract, au.method))
    if fn is None:
        raise ConfigurationError(f"unknown method {au.contract}.{au.method}")
    if au.contract == AUCTION and au.method == "bid":
        return fn(ctx, *au.params, au.au_id)
    return fn(ctx, *au.params)


def run_serial(aus, state):
    """Execute ``aus`` in the given order on ``state`` (mutated); returns outcomes."""
    ctx = StateContext(state)
    return {au.au_id: execute(au, ctx) for au in aus}


# --- workload generation ---------------------------------------------------

def _coin_call(rng, au_id, n, read_ratio):
    if rng.random() < read_ratio:
        return coin_get_balance(au_id, rng.randrange(n))
    s, r = rng.sample(range(n), 2)
    return coin_send(au_id, s, r, rng.randint(1, 50))


def _ballot_call(rng, au_id, n_voters, n_proposals):
    u = rng.random()
    if u < 0.6:
        return ballot_vote(au_id, rng.randrange(n_voters), rng.randrange(n_proposals))
    if u < 0.9:
        a, b = rng.sample(range(n_voters), 2)
        return ballot_delegate(au_id, a, b)
    if u < 0.95:
        return ballot_give_right(au_id, rng.randrange(n_voters))
    return ballot_winner(au_id, n_proposals)


def _auction_call(rng, au_id, n_bidders):
    if rng.random() < 0.75:
        return auction_bid(au_id, rng.randrange(n_bidders), rng.randint(1, 10 + 5 * (au_id + 1)))
    return auction_withdraw(au_id, rng.randrange(n_bidders))


class _Universe:
    """Object layout of one contract plus a call generator over it."""

    def __init__(self, contract, n_objects, n_aus, read_ratio):
        self.contract = contract
        if contract == COIN:
            self.n = max(2, n_objects)
            self.state = coin_layout(self.n)
            self.draw = lambda rng, i: _coin_call(rng, i, self.n, read_ratio)
        elif contract == BALLOT:
            self.voters, self.proposals = ballot_split(n_objects)
            rights = range((3 * self.voters + 3) // 4)
            self.state = ballot_layout(self.voters, self.proposals, rights)
            self.draw = lambda rng, i: _ballot_call(rng, i, self.voters, self.proposals)
        elif contract == AUCTION:
            self.bidders = max(1, n_objects - 3)
            self.state = auction_layout(self.bidders, end=max(1, (9 * n_aus) // 10))
            self.draw = lambda rng, i: _auction_call(rng, i, self.bidders)
        else:
            raise ConfigurationError(f"no workload generator for {contract!r}")


def generate_workload(contract, n_aus, n_objects, seed=0, read_ratio=0.5):
    """Seeded list of AU invocations plus the genesis state they run on.

    ``contract`` is one of coin, ballot, auction (simpleauction) or mixed;
    mixed picks each unit's contract uniformly and gives every contract a
    third of the object budget.  ``read_ratio`` is the share of Coin units
    that only query a balance.
    """
    contract = canonical_contract(contract)
    if n_aus < 1 or n_objects < 1:
        raise ConfigurationError("n_aus and n_objects must be >= 1")
    rng = random.Random(seed)
    if contract == MIXED:
        share = max(1, n_objects // 3)
        universes = [_Universe(c, share, n_aus, read_ratio) for c in (COIN, BALLOT, AUCTION)]
    else:
        universes = [_Universe(contract, n_objects, n_aus, read_ratio)]
    aus = []
    for i in range(n_aus):
        u = universes[rng.randrange(len(universes))] if len(universes) > 1 else universes[0]
        aus.append(u.draw(rng, i))
    state = {}
    for u in universes:
        state.update(u.state)
    return Workload(aus, state, contract, n_objects, seed)


def figure_workload():
    """T1: x <- x + 10 and T2: x <- 2x from x = 0; serial order gives 20."""
    return Workload([arith_add(0, 0, 10), arith_mul(1, 0, 2)], arith_layout(1), ARITH, 1)
