#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "vchain/bytes.hpp"
#include "vchain/chain.hpp"
#include "vchain/vo.hpp"

using namespace vchain;
namespace fs = std::filesystem;

namespace {

std::string cli() {
    const char* p = std::getenv("VCHAIN_CLI");
    REQUIRE(p != nullptr);
    return p;
}

struct RunResult {
    int code;
    std::string out;
};

RunResult run(const std::string& args) {
    std::string out_file = "/tmp/vchain-cli-out.txt";
    std::string cmd = cli() + " " + args + " > " + out_file + " 2>&1";
    int rc = std::system(cmd.c_str());
    Bytes b = read_file(out_file);
    return {WEXITSTATUS(rc), std::string(b.begin(), b.end())};
}

const std::string kWork = "/tmp/vchain-cli-work";

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    f << text;
}

} // namespace

TEST_CASE("end-to-end operator flow") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    std::string params = kWork + "/params.bin";

    // ceremony: deterministic test seed on the small curve
    auto kg = run("keygen --construction acc2 --capacity 4096 --curve ss256 --seed 42 -o " +
                  params);
    CAPTURE(kg.out);
    REQUIRE(kg.code == 0);
    // refuses to overwrite
    CHECK(run("keygen --construction acc2 --capacity 4096 --curve ss256 -o " + params).code == 2);
    // capacity below the minimum is a setup failure
    CHECK(run("keygen --construction acc1 --capacity 1 --curve ss256 -o " + kWork + "/p1.bin")
              .code == 3);
    // params round trip equals the in-memory ceremony
    {
        Drbg rng(42);
        PublicParams direct =
            keygen(Construction::acc2, 4096, PairingGroup::preset("ss256"), rng);
        CHECK(PublicParams::deserialize(read_file(params)).serialize() == direct.serialize());
    }

    // ingest three objects, one per block
    write_text(kWork + "/objs.jsonl",
               R"({"t": 100, "v": [3], "w": ["coffee", "shop"]})"
               "\n"
               R"({"t": 130, "v": [7], "w": ["tea", "shop"]})"
               "\n"
               R"({"t": 160, "v": [12], "w": ["coffee", "bar"]})"
               "\n");
    std::string chain = kWork + "/chain";
    auto bd = run("build --params " + params + " --input " + kWork +
                  "/objs.jsonl --chain " + chain +
                  " --index both --policy count:1 --widths 4 --skiplen 2 --reserved water");
    CAPTURE(bd.out);
    REQUIRE(bd.code == 0);
    CHECK(bd.out.find("4 blocks") != std::string::npos); // genesis + 3
    CHECK(fs::exists(chain + "/chain.meta"));
    CHECK(fs::exists(chain + "/headers.bin"));
    CHECK(fs::exists(chain + "/blocks/00000003.blk"));

    // malformed ingestion line reports its number
    write_text(kWork + "/bad.jsonl", "{\"t\": 1, \"v\": [1], \"w\": []}\nnot json\n");
    auto bad = run("build --params " + params + " --input " + kWork + "/bad.jsonl --chain " +
                   kWork + "/chain-bad --index nil --widths 4");
    CHECK(bad.code == 2);
    CHECK(bad.out.find("line 2") != std::string::npos);

    // query + verify round trip: ACCEPT and exit 0
    std::string q = R"("window=[100,200] range=[0,10] bool=\"coffee\"")";
    auto qr = run("query --chain " + chain + " --query " + q + " --vo " + kWork +
                  "/out.vo --results " + kWork + "/r.jsonl");
    CAPTURE(qr.out);
    REQUIRE(qr.code == 0);
    CHECK(qr.out.find("coffee") != std::string::npos);
    auto vf = run("verify --chain " + chain + " --query " + q + " --vo " + kWork +
                  "/out.vo --results " + kWork + "/r.jsonl");
    CAPTURE(vf.out);
    REQUIRE(vf.code == 0);
    CHECK(vf.out.find("ACCEPT") != std::string::npos);
    auto vj = run("verify --json --chain " + chain + " --query " + q + " --vo " + kWork +
                  "/out.vo --results " + kWork + "/r.jsonl");
    CHECK(vj.out.find("\"accepted\":true") != std::string::npos);

    // truncating the VO flips the verdict to a gap and exit code 1
    {
        Bytes vo_bytes = read_file(kWork + "/out.vo");
        VerificationObject vo = VerificationObject::deserialize(
            vo_bytes, *PairingGroup::preset("ss256"), false);
        vo.segments.pop_back();
        write_file_atomic(kWork + "/trunc.vo", vo.serialize(*PairingGroup::preset("ss256")));
    }
    auto rej = run("verify --chain " + chain + " --query " + q + " --vo " + kWork +
                   "/trunc.vo --results " + kWork + "/r.jsonl");
    CHECK(rej.code == 1);
    CHECK(rej.out.find("REJECT: gap") != std::string::npos);

    // results file must match as well
    write_text(kWork + "/r2.jsonl", "");
    auto rej2 = run("verify --chain " + chain + " --query " + q + " --vo " + kWork +
                    "/out.vo --results " + kWork + "/r2.jsonl");
    CHECK(rej2.code == 1);

    // bad query text is a usage error
    CHECK(run("query --chain " + chain + " --query \"nonsense\" --vo /dev/null").code == 2);

    // subscriptions replay the chain and self-verify
    write_text(kWork + "/subs.txt", "bool=\"coffee\"\nrange=[0,5] bool=\"shop\"\n");
    auto sub = run("subscribe --chain " + chain + " --queries " + kWork +
                   "/subs.txt --mode realtime --verify");
    CAPTURE(sub.out);
    REQUIRE(sub.code == 0);
    CHECK(sub.out.find("REJECT") == std::string::npos);
    CHECK(sub.out.find("ACCEPT") != std::string::npos);
    auto lazy = run("subscribe --chain " + chain + " --queries " + kWork +
                    "/subs.txt --mode lazy --flush-threshold 2 --verify --out " + kWork +
                    "/subout");
    CAPTURE(lazy.out);
    REQUIRE(lazy.code == 0);
    CHECK(lazy.out.find("REJECT") == std::string::npos);
    CHECK(fs::exists(kWork + "/subout"));

    // stats reports sizes
    auto stats = run("stats --chain " + chain);
    REQUIRE(stats.code == 0);
    CHECK(stats.out.find("ads") != std::string::npos);
    auto stats_json = run("stats --json --chain " + chain);
    CHECK(stats_json.out.find("\"ads_bytes_per_block\"") != std::string::npos);

    // rebuilt chain from the same input is byte-identical
    auto bd2 = run("build --params " + params + " --input " + kWork +
                   "/objs.jsonl --chain " + kWork +
                   "/chain2 --index both --policy count:1 --widths 4 --skiplen 2 --reserved "
                   "water");
    REQUIRE(bd2.code == 0);
    CHECK(read_file(chain + "/headers.bin") == read_file(kWork + "/chain2/headers.bin"));
    CHECK(read_file(chain + "/blocks/00000002.blk") ==
          read_file(kWork + "/chain2/blocks/00000002.blk"));

    // usage error: unknown subcommand
    CHECK(run("frobnicate").code == 2);
    fs::remove_all(kWork);
}

TEST_CASE("empty ingestion yields a genesis-only chain") {
    fs::remove_all(kWork);
    fs::create_directories(kWork);
    std::string params = kWork + "/p.bin";
    REQUIRE(run("keygen --construction acc1 --capacity 64 --curve ss256 --seed 7 -o " + params)
                .code == 0);
    write_text(kWork + "/empty.jsonl", "");
    auto bd = run("build --params " + params + " --input " + kWork + "/empty.jsonl --chain " +
                  kWork + "/chain --index intra --widths 4");
    CAPTURE(bd.out);
    REQUIRE(bd.code == 0);
    CHECK(bd.out.find("1 blocks") != std::string::npos);
    // a query over the empty chain accepts with no results
    auto qr = run("query --chain " + kWork + "/chain --query \"window=[0,10]\" --vo " + kWork +
                  "/e.vo --results " + kWork + "/e.jsonl");
    REQUIRE(qr.code == 0);
    auto vf = run("verify --chain " + kWork + "/chain --query \"window=[0,10]\" --vo " + kWork +
                  "/e.vo --results " + kWork + "/e.jsonl");
    CHECK(vf.code == 0);
    fs::remove_all(kWork);
}
