import itertools
import random
from collections import Counter

import pytest

from scexec.contracts import (AUCTION, AtomicUnit, BALLOT, COIN, FAILED, MIXED, OK, StateContext,
                              auction_bid, auction_layout, auction_withdraw, balance_key,
                              ballot_delegate, ballot_give_right, ballot_layout,
                              ballot_vote, ballot_winner, ballot_winner_of,
                              canonical_contract, coin_get_balance, coin_key, coin_layout,
                              coin_mint, coin_send, execute, figure_workload,
                              generate_workload, pending_key, proposal_key, run_serial,
                              voter_key, HIGHEST_BID, HIGHEST_BIDDER)
from scexec.stm import ConfigurationError


def coin_state(*balances):
    return {coin_key(i): b for i, b in enumerate(balances)}


def test_coin_send():
    state = coin_state(10, 0)
    assert run_serial([coin_send(0, 0, 1, 4)], state) == {0: OK}
    assert state == coin_state(6, 4)


def test_coin_send_insufficient_funds():
    state = coin_state(3, 0)
    assert run_serial([coin_send(0, 0, 1, 4)], state) == {0: FAILED}
    assert state == coin_state(3, 0)


def test_coin_send_to_self_rejected():
    with pytest.raises(ValueError):
        coin_send(0, 1, 1, 5)


def test_two_sends_commute_on_receiver():
    aus = [coin_send(0, 0, 2, 5), coin_send(1, 1, 2, 7)]
    results = set()
    for order in itertools.permutations(aus):
        state = coin_state(10, 10, 0)
        run_serial(order, state)
        results.add(state[coin_key(2)])
    assert results == {12}


def test_coin_get_balance_and_mint():
    state = coin_state(10)
    assert run_serial([coin_get_balance(0, 0), coin_mint(1, 0, 5)], state) == {0: OK, 1: OK}
    assert state == coin_state(15)


def test_unknown_account_is_configuration_error():
    with pytest.raises(ConfigurationError):
        run_serial([coin_get_balance(0, 9)], coin_state(1))


def test_ballot_tally():
    state = ballot_layout(3, 2)
    run_serial([ballot_vote(0, 0, 0), ballot_vote(1, 1, 1), ballot_vote(2, 2, 1)], state)
    assert (state[proposal_key(0)], state[proposal_key(1)]) == (1, 2)
    assert ballot_winner_of(state, 2) == 1
    before = dict(state)
    assert run_serial([ballot_winner(3, 2)], state) == {3: OK}
    assert state == before


def test_ballot_winner_ties_go_to_lowest_index():
    state = ballot_layout(2, 2)
    run_serial([ballot_vote(0, 0, 1), ballot_vote(1, 1, 0)], state)
    assert ballot_winner_of(state, 2) == 0


def test_ballot_delegate_then_vote():
    state = ballot_layout(2, 1)
    run_serial([ballot_delegate(0, 0, 1), ballot_vote(1, 1, 0)], state)
    assert state[proposal_key(0)] == 2


def test_ballot_delegate_to_voter_who_already_voted():
    state = ballot_layout(2, 2)
    run_serial([ballot_vote(0, 1, 1), ballot_delegate(1, 0, 1)], state)
    assert state[proposal_key(1)] == 2


def test_ballot_one_hop_only():
    state = ballot_layout(3, 1)
    out = run_serial([ballot_delegate(0, 1, 2), ballot_delegate(1, 0, 1)], state)
    assert out == {0: OK, 1: FAILED}


def test_ballot_double_vote_fails():
    state = ballot_layout(1, 2)
    out = run_serial([ballot_vote(0, 0, 0), ballot_vote(1, 0, 1)], state)
    assert out == {0: OK, 1: FAILED}
    assert (state[proposal_key(0)], state[proposal_key(1)]) == (1, 0)


def test_ballot_vote_needs_right():
    state = ballot_layout(2, 1, rights=[0])
    assert run_serial([ballot_vote(0, 1, 0)], state) == {0: FAILED}
    assert run_serial([ballot_give_right(1, 1), ballot_vote(2, 1, 0)], state) == {1: OK, 2: OK}
    assert run_serial([ballot_give_right(3, 1)], state) == {3: FAILED}


def test_auction_bids_and_withdraw():
    state = auction_layout(3, end=100)
    out = run_serial([auction_bid(0, 1, 10), auction_bid(1, 2, 20)], state)
    assert out == {0: OK, 1: OK}
    assert state[HIGHEST_BIDDER] == 2 + 1 and state[HIGHEST_BID] == 20
    assert state[pending_key(1)] == 10
    run_serial([auction_withdraw(2, 1)], state)
    assert state[pending_key(1)] == 0 and state[balance_key(1)] == 10


@pytest.mark.parametrize("value", [5, 10])
def test_auction_bid_not_above_highest_fails(value):
    state = auction_layout(2, end=100)
    run_serial([auction_bid(0, 0, 10)], state)
    before = dict(state)
    assert run_serial([auction_bid(1, 1, value)], state) == {1: FAILED}
    assert state == before


def test_auction_closes_at_logical_end():
    state = auction_layout(1, end=3)
    assert run_serial([auction_bid(3, 0, 10)], state) == {3: FAILED}


def test_unknown_method():
    with pytest.raises(ConfigurationError):
        execute(AtomicUnit(0, COIN, "burn", (1,)), StateContext(coin_state(1)))


def test_canonical_names():
    assert canonical_contract("SimpleAuction") == AUCTION
    assert canonical_contract("Coin") == COIN
    with pytest.raises(ConfigurationError):
        canonical_contract("erc20")


@pytest.mark.parametrize("contract", [COIN, BALLOT, AUCTION, MIXED])
def test_workload_is_deterministic(contract):
    a = generate_workload(contract, 50, 12, seed=3)
    b = generate_workload(contract, 50, 12, seed=3)
    assert a.aus == b.aus and a.initial_state == b.initial_state
    assert a.aus != generate_workload(contract, 50, 12, seed=4).aus


def test_coin_workload_stays_inside_declared_accounts():
    w = generate_workload(COIN, 400, 40, seed=1)
    assert len(w.aus) == 400 and len(w.initial_state) == 40
    for au in w.aus:
        accts = au.params[:2] if au.method == "send" else au.params[:1]
        assert all(coin_key(a) in w.initial_state for a in accts)


def test_mixed_counts_for_pinned_seed():
    w = generate_workload(MIXED, 300, 30, seed=7)
    counts = Counter(au.contract for au in w.aus)
    assert counts == {COIN: 93, BALLOT: 104, AUCTION: 103}
    assert all(60 <= c <= 140 for c in counts.values())


def test_workload_rejects_empty_batch():
    with pytest.raises(ConfigurationError):
        generate_workload(COIN, 0, 4)
    with pytest.raises(ConfigurationError):
        generate_workload(COIN, 4, 0)


@pytest.mark.parametrize("contract", [COIN, BALLOT, AUCTION, MIXED])
def test_serial_replay_is_deterministic(contract):
    w = generate_workload(contract, 120, 16, seed=9)
    s1, s2 = dict(w.initial_state), dict(w.initial_state)
    assert run_serial(w.aus, s1) == run_serial(w.aus, s2)
    assert s1 == s2


def test_coin_conservation_under_any_order():
    w = generate_workload(COIN, 100, 10, seed=2)
    total = sum(w.initial_state.values())
    rng = random.Random(0)
    for _ in range(5):
        aus = list(w.aus)
        rng.shuffle(aus)
        state = dict(w.initial_state)
        run_serial(aus, state)
        assert sum(state.values()) == total
        assert min(state.values()) >= 0


def test_ballot_weight_conservation():
    w = generate_workload(BALLOT, 200, 20, seed=5)
    state = dict(w.initial_state)
    granted = sum(v for k, v in state.items() if k.endswith(".weight"))
    outcomes = run_serial(w.aus, state)
    granted += sum(1 for au in w.aus
                   if au.method == "give_right" and outcomes[au.au_id] == OK)
    counted = sum(v for k, v in state.items() if k.startswith("ballot.proposal."))
    voters = {k.rsplit(".", 1)[0] for k in state if k.startswith("ballot.voter.")}
    unexercised = sum(state[v + ".weight"] for v in voters if not state[v + ".voted"])
    # a delegator's weight moved on to its delegate, so it is not counted twice
    assert counted + unexercised == granted
    assert any(state[v + ".delegate"] for v in voters)


def test_auction_highest_bid_is_monotone():
    w = generate_workload(AUCTION, 150, 10, seed=6)
    state = dict(w.initial_state)
    last = 0
    ctx = StateContext(state)
    for au in w.aus:
        execute(au, ctx)
        assert state[HIGHEST_BID] >= last
        last = state[HIGHEST_BID]


def test_figure_workload():
    w = figure_workload()
    state = dict(w.initial_state)
    run_serial(w.aus, state)
    assert state == {"arith.0": 20}
    state = dict(w.initial_state)
    run_serial(reversed(w.aus), state)
    assert state == {"arith.0": 10}
