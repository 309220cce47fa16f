#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <thread>

#include "testutil.hpp"
#include "vchain/accumulator.hpp"
#include "vchain/errors.hpp"

using namespace vchain;
using namespace vchain::testutil;

namespace {

TransparentParams make_params(Construction c, uint64_t q, uint64_t seed = 42) {
    Drbg rng(seed);
    return keygen_transparent(c, q, PairingGroup::preset("ss256"), rng);
}

} // namespace

TEST_CASE("keygen shapes and boundaries") {
    auto g = PairingGroup::preset("ss256");
    Drbg rng(1);
    PublicParams p1 = keygen(Construction::acc1, 8, g, rng);
    CHECK(p1.powers_lo.size() == 9); // q+1 powers
    CHECK(p1.powers_lo[0] == g->generator());
    // pairing bilinearity forced: e(g^s, g^s) == e(g, g^{s^2})
    CHECK(g->pairing(p1.power(1), p1.power(1)) == g->pairing(p1.power(0), p1.power(2)));

    PublicParams p2 = keygen(Construction::acc2, 8, g, rng);
    CHECK(p2.powers_lo.size() == 8);      // indices 0..q-1
    CHECK(p2.powers_hi.size() == 6);      // indices q+1..2q-2
    CHECK_THROWS_AS(p2.power(8), Error);  // the q-th power is absent
    CHECK(g->pairing(p2.power(7), p2.power(2)) == g->pairing(p2.power(4), p2.power(5)));

    CHECK_THROWS_AS(keygen(Construction::acc1, 1, g, rng), SetupError);
    CHECK_THROWS_AS(keygen(Construction::acc1, 1u << 20, g, rng, /*budget=*/1 << 16),
                    SetupError);

    // seeded ceremonies are reproducible
    Drbg r1(99), r2(99);
    PublicParams a = keygen(Construction::acc1, 4, g, r1);
    PublicParams b = keygen(Construction::acc1, 4, g, r2);
    CHECK(a.serialize() == b.serialize());

    Drbg sc(3);
    CHECK(a.spot_check(sc));
    CHECK(p2.spot_check(sc));
}

TEST_CASE("setup matches the transparent oracle") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        CAPTURE(construction_name(c));
        auto tp = make_params(c, 64);
        Drbg rng(5);
        for (int i = 0; i < 8; ++i) {
            Multiset x = random_multiset(rng, tp.params, rng.below(10) + 1, 3);
            CHECK(setup(x, tp.params) == oracle_setup(x, tp));
        }
        // empty multiset
        Multiset empty;
        AccValue ev = setup(empty, tp.params);
        if (c == Construction::acc1) {
            CHECK(ev.a == tp.params.group->generator()); // g^{P=1}, the empty product
        } else {
            CHECK(ev.a.inf);
            CHECK(ev.b.inf);
        }
        CHECK(ev == oracle_setup(empty, tp));
    }
}

TEST_CASE("acc1 single-element identity") {
    auto tp = make_params(Construction::acc1, 8);
    const auto& g = *tp.params.group;
    Drbg rng(6);
    Big x = g.random_scalar(rng);
    Multiset m;
    m.add(x);
    AccValue acc = setup(m, tp.params);
    // e(g^x * g^s, g) == e(acc, g)
    G1Point gx_gs = g.add(g.mul_gen(x), tp.params.power(1));
    CHECK(g.pairing(gx_gs, g.generator()) == g.pairing(acc.a, g.generator()));
    CHECK(gx_gs == acc.a);
}

TEST_CASE("setup capacity errors") {
    auto tp1 = make_params(Construction::acc1, 4);
    Drbg rng(7);
    Multiset big = random_multiset(rng, tp1.params, 5);
    CHECK_THROWS_AS(setup(big, tp1.params), CapacityError);

    auto tp2 = make_params(Construction::acc2, 8);
    Multiset bad;
    bad.add(Big(8)); // element value must stay below q
    CHECK_THROWS_AS(setup(bad, tp2.params), CapacityError);
    Multiset zero;
    zero.add(Big(0));
    CHECK_THROWS_AS(setup(zero, tp2.params), CapacityError);
}

TEST_CASE("disjoint proof round trip") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        CAPTURE(construction_name(c));
        auto tp = make_params(c, 128);
        Drbg rng(8);
        for (int i = 0; i < 6; ++i) {
            auto [x1, x2] = random_disjoint_pair(rng, tp.params, rng.below(12) + 1,
                                                 rng.below(6) + 1, 3);
            AccValue a1 = setup(x1, tp.params);
            AccValue a2 = setup(x2, tp.params);
            DisjointProof pf = prove_disjoint(x1, x2, tp.params);
            CHECK(verify_disjoint(a1, a2, pf, tp.params));
        }
    }
}

TEST_CASE("prove_disjoint rejects intersecting supports") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        auto tp = make_params(c, 32);
        Drbg rng(9);
        Multiset x = random_multiset(rng, tp.params, 4);
        CHECK_THROWS_AS(prove_disjoint(x, x, tp.params), NotDisjointError);
        // single shared element
        Multiset y = random_multiset(rng, tp.params, 3);
        Multiset z;
        z.add(x.entries().begin()->first);
        if (y.support_disjoint(x)) {
            Multiset y2 = Multiset::sum(y, z);
            CHECK_THROWS_AS(prove_disjoint(x, y2, tp.params), NotDisjointError);
        }
    }
}

TEST_CASE("worked example: car keywords") {
    // W2 = {Sedan, Audi} vs clause {Benz, BMW} must yield a valid proof
    for (auto c : {Construction::acc1, Construction::acc2}) {
        auto tp = make_params(c, 1 << 16);
        Multiset w2 = from_strings({"Sedan", "Audi"}, tp.params);
        Multiset clause = from_strings({"Benz", "BMW"}, tp.params);
        REQUIRE(w2.support_disjoint(clause));
        DisjointProof pf = prove_disjoint(w2, clause, tp.params);
        CHECK(verify_disjoint(setup(w2, tp.params), setup(clause, tp.params), pf, tp.params));
        // and the same clause against {Van, Benz} is not provable
        Multiset w3 = from_strings({"Van", "Benz"}, tp.params);
        CHECK_THROWS_AS(prove_disjoint(w3, clause, tp.params), NotDisjointError);
    }
}

TEST_CASE("verify_disjoint rejects replay and mauling") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        CAPTURE(construction_name(c));
        auto tp = make_params(c, 64);
        const auto& g = *tp.params.group;
        Drbg rng(10);
        auto [x1, x2] = random_disjoint_pair(rng, tp.params, 6, 3);
        auto [y1, y3] = random_disjoint_pair(rng, tp.params, 6, 3);
        AccValue a1 = setup(x1, tp.params);
        AccValue a2 = setup(x2, tp.params);
        AccValue a3 = setup(y3, tp.params);
        DisjointProof pf = prove_disjoint(x1, x2, tp.params);
        REQUIRE(verify_disjoint(a1, a2, pf, tp.params));
        // replay against a different right-hand multiset
        CHECK_FALSE(verify_disjoint(a1, a3, pf, tp.params));
        // perturb the proof by the generator
        DisjointProof mauled = pf;
        if (c == Construction::acc1)
            mauled.f1 = g.add(mauled.f1, g.generator());
        else
            mauled.pi = g.add(mauled.pi, g.generator());
        CHECK_FALSE(verify_disjoint(a1, a2, mauled, tp.params));
        // random group elements as a proof
        DisjointProof junk = pf;
        junk.f1 = g.mul_gen(g.random_scalar(rng));
        junk.f2 = g.mul_gen(g.random_scalar(rng));
        junk.pi = g.mul_gen(g.random_scalar(rng));
        CHECK_FALSE(verify_disjoint(a1, a2, junk, tp.params));
    }
}

TEST_CASE("multiplicity does not affect disjointness outcomes") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        auto tp = make_params(c, 256);
        Drbg rng(11);
        auto [x1, x2] = random_disjoint_pair(rng, tp.params, 5, 3);
        Multiset x1k, x2k; // same supports, multiplicity 3
        for (const auto& [v, e] : x1.entries()) x1k.add(v, 3);
        for (const auto& [v, e] : x2.entries()) x2k.add(v, 3);
        DisjointProof p_plain = prove_disjoint(x1, x2, tp.params);
        DisjointProof p_mult = prove_disjoint(x1k, x2k, tp.params);
        CHECK(verify_disjoint(setup(x1, tp.params), setup(x2, tp.params), p_plain, tp.params));
        CHECK(verify_disjoint(setup(x1k, tp.params), setup(x2k, tp.params), p_mult, tp.params));
    }
}

TEST_CASE("acc2 sum homomorphism") {
    auto tp = make_params(Construction::acc2, 512);
    const auto& g = *tp.params.group;
    Drbg rng(12);
    for (int i = 0; i < 6; ++i) {
        Multiset x1 = random_multiset(rng, tp.params, 5, 2);
        Multiset x2 = random_multiset(rng, tp.params, 4, 2);
        AccValue v1 = setup(x1, tp.params);
        AccValue v2 = setup(x2, tp.params);
        AccValue both[] = {v1, v2};
        CHECK(sum(both, g) == setup(Multiset::sum(x1, x2), tp.params));
    }
    // single-operand identity
    Multiset x = random_multiset(rng, tp.params, 3);
    AccValue v = setup(x, tp.params);
    AccValue one[] = {v};
    CHECK(sum(one, g) == v);
    // acc1 inputs are unsupported
    auto tp1 = make_params(Construction::acc1, 8);
    AccValue a1 = setup(Multiset{}, tp1.params);
    AccValue bad[] = {a1};
    CHECK_THROWS_AS(sum(bad, g), UnsupportedError);
    CHECK_THROWS_AS(sum(std::span<const AccValue>{}, g), AggregationError);
}

TEST_CASE("acc2 proof aggregation") {
    auto tp = make_params(Construction::acc2, 1 << 16);
    const auto& g = *tp.params.group;
    // the online-batching example: two objects mismatching {"Benz"}
    Multiset w2 = from_strings({"Sedan", "Audi"}, tp.params);
    Multiset w4 = from_strings({"Van", "BMW"}, tp.params);
    Multiset clause = from_strings({"Benz"}, tp.params);
    DisjointProof p2 = prove_disjoint(w2, clause, tp.params);
    DisjointProof p4 = prove_disjoint(w4, clause, tp.params);
    DisjointProof both[] = {p2, p4};
    DisjointProof agg = proof_sum(both, g);
    AccValue digests[] = {setup(w2, tp.params), setup(w4, tp.params)};
    AccValue att_2_4 = sum(digests, g);
    CHECK(verify_disjoint(att_2_4, setup(clause, tp.params), agg, tp.params));
    // aggregate equals a fresh proof over the summed multiset
    DisjointProof direct = prove_disjoint(Multiset::sum(w2, w4), clause, tp.params);
    CHECK(agg.pi == direct.pi);
    // singleton aggregation is the identity
    DisjointProof single[] = {p2};
    CHECK(proof_sum(single, g).pi == p2.pi);
    // mixed right-hand sets refuse to aggregate
    Multiset other = from_strings({"BMW"}, tp.params);
    DisjointProof p_other = prove_disjoint(w2, other, tp.params);
    DisjointProof mixed[] = {p2, p_other};
    CHECK_THROWS_AS(proof_sum(mixed, g), AggregationError);
}

TEST_CASE("construction mismatch is a type error") {
    auto tp1 = make_params(Construction::acc1, 16);
    auto tp2 = make_params(Construction::acc2, 16);
    Drbg rng(13);
    auto [x1, x2] = random_disjoint_pair(rng, tp1.params, 3, 2);
    AccValue a1 = setup(x1, tp1.params);
    AccValue a2 = setup(x2, tp1.params);
    DisjointProof pf = prove_disjoint(x1, x2, tp1.params);
    CHECK_THROWS_AS(verify_disjoint(a1, a2, pf, tp2.params), LogicError);
}

TEST_CASE("params and value serialization round trips") {
    for (auto c : {Construction::acc1, Construction::acc2}) {
        auto tp = make_params(c, 16);
        Bytes blob = tp.params.serialize();
        PublicParams loaded = PublicParams::deserialize(blob);
        CHECK(loaded.serialize() == blob);
        CHECK(loaded.capacity == tp.params.capacity);
        CHECK(loaded.construction == c);

        Drbg rng(14);
        auto [x1, x2] = random_disjoint_pair(rng, tp.params, 3, 2);
        AccValue v = setup(x1, tp.params);
        Bytes vb = v.serialize(*tp.params.group);
        ByteReader r(vb);
        CHECK(AccValue::deserialize(r, *tp.params.group, true) == v);

        DisjointProof pf = prove_disjoint(x1, x2, tp.params);
        ByteWriter w;
        pf.serialize_into(w, *tp.params.group);
        ByteReader r2(w.out);
        DisjointProof pf2 = DisjointProof::deserialize(r2, *tp.params.group, true);
        CHECK(verify_disjoint(setup(x1, tp.params), setup(x2, tp.params), pf2, tp.params));
    }
    Bytes garbage{'n', 'o', 'p', 'e'};
    CHECK_THROWS_AS(PublicParams::deserialize(garbage), ParseError);
}

TEST_CASE("operations are safe for concurrent use") {
    auto tp = make_params(Construction::acc1, 64);
    Drbg seed_rng(15);
    std::vector<uint64_t> seeds;
    for (int i = 0; i < 4; ++i) seeds.push_back(seed_rng.u64());
    std::atomic<int> failures{0};
    std::vector<std::thread> threads;
    for (uint64_t s : seeds) {
        threads.emplace_back([&, s] {
            Drbg rng(s);
            for (int i = 0; i < 3; ++i) {
                auto [x1, x2] = random_disjoint_pair(rng, tp.params, 6, 3);
                DisjointProof pf = prove_disjoint(x1, x2, tp.params);
                if (!verify_disjoint(setup(x1, tp.params), setup(x2, tp.params), pf, tp.params))
                    failures.fetch_add(1);
            }
        });
    }
    for (auto& t : threads) t.join();
    CHECK(failures.load() == 0);
}
