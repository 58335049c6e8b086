import re

import pytest

from bioclust import Complexity, ScenarioSpec, generate, generate_lines, inject_attack
from bioclust.corpusgen import template_names
from bioclust.errors import DataError

MAC = re.compile(r"MAC=(?:[0-9a-f]{2}:){6}((?:[0-9a-f]{2}:){5}[0-9a-f]{2}):08:00")
SRC = re.compile(r"SRC=(\d+\.\d+\.\d+\.\d+)")


def test_exact_length_and_determinism():
    spec = ScenarioSpec(users=3, duration=777, complexity=Complexity.HIGH, seed=12)
    lines = generate_lines(spec)
    assert len(lines) == 777
    assert generate_lines(spec) == lines
    assert generate_lines(ScenarioSpec(users=3, duration=777, complexity=Complexity.HIGH, seed=13)) != lines


def test_families_can_be_selected():
    lines = generate_lines(ScenarioSpec(templates=("db",), duration=300))
    assert all(re.match(r"\d{6} \d\d:\d\d:\d\d\t", ln) for ln in lines)
    fw = generate_lines(ScenarioSpec(templates=("firewall",), duration=50))
    assert all("iptables" in ln for ln in fw)
    with pytest.raises(ValueError):
        ScenarioSpec(templates=("mail",))
    with pytest.raises(ValueError):
        ScenarioSpec(users=0)


def test_high_complexity_offers_more_templates():
    low = template_names(ScenarioSpec(complexity=Complexity.LOW))
    high = template_names(ScenarioSpec(complexity=Complexity.HIGH))
    assert set(low) < set(high)


def test_all_three_families_appear_in_a_mixed_corpus():
    lines = generate_lines(ScenarioSpec(users=2, duration=2000, seed=3))
    assert any("iptables" in ln for ln in lines)
    assert any('"GET ' in ln for ln in lines)
    assert any(" Query\t" in ln for ln in lines)


def test_inject_uses_an_unseen_mac_and_ip(tmp_path):
    corpus = tmp_path / "c.log"
    generate(ScenarioSpec(users=3, duration=3000, seed=2), corpus)
    before = corpus.read_text().splitlines()
    out, targets, idx = inject_attack(corpus, seed=9, copies=2)
    after = out.read_text().splitlines()
    assert len(after) == len(before) + 2 and len(idx) == 2
    assert [int(t) for t in targets.read_text().split()] == idx
    attack = after[idx[0]]
    assert after[idx[1]] == attack
    rest = [ln for i, ln in enumerate(after) if i not in idx]
    assert rest == before
    mac, ip = MAC.search(attack).group(1), SRC.search(attack).group(1)
    assert all(mac not in ln for ln in before)
    assert all(f"SRC={ip} " not in ln for ln in before)
    assert ip.startswith("10.")


def test_inject_needs_a_firewall_line(tmp_path):
    corpus = tmp_path / "db.log"
    generate(ScenarioSpec(templates=("db",), duration=50), corpus)
    with pytest.raises(DataError, match="no firewall line"):
        inject_attack(corpus, seed=1)
