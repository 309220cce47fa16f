// Operator entry points: key ceremony, chain building, window queries,
// light-client verification, subscriptions, and chain statistics.
//
// Exit codes: 0 success / verification accepted, 1 verification rejected,
// 2 usage or input error, 3 internal error.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "vchain/chain.hpp"
#include "vchain/errors.hpp"
#include "vchain/query.hpp"
#include "vchain/subscribe.hpp"
#include "vchain/verify.hpp"

using namespace vchain;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    Bytes b = read_file(path);
    return std::string(b.begin(), b.end());
}

nlohmann::json object_to_json(const TemporalObject& o) {
    nlohmann::json j;
    j["t"] = o.t;
    j["v"] = o.v;
    j["w"] = o.w;
    return j;
}

void write_results_jsonl(const std::string& path, const std::vector<TemporalObject>& objs) {
    std::ostringstream out;
    for (const auto& o : objs) out << object_to_json(o).dump() << "\n";
    std::string s = out.str();
    write_file_atomic(path, BytesView(reinterpret_cast<const uint8_t*>(s.data()), s.size()));
}

/// Results files carry already-quantized values; read them verbatim.
std::vector<TemporalObject> read_results_jsonl(const std::string& path) {
    std::vector<TemporalObject> out;
    std::istringstream in(slurp(path));
    std::string line;
    size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            nlohmann::json j = nlohmann::json::parse(line);
            TemporalObject o;
            o.t = j.at("t").get<uint64_t>();
            if (j.contains("v")) o.v = j["v"].get<std::vector<uint64_t>>();
            if (j.contains("w")) o.w = j["w"].get<std::vector<std::string>>();
            o.canonicalize();
            out.push_back(std::move(o));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError("results line " + std::to_string(ln) + ": " + e.what());
        }
    }
    return out;
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream ss(s);
    while (std::getline(ss, cur, ',')) out.push_back(cur);
    return out;
}

int cmd_keygen(const std::string& construction, uint64_t capacity, const std::string& curve,
               std::optional<uint64_t> seed, const std::string& out_path) {
    if (fs::exists(out_path)) {
        std::cerr << "refusing to overwrite " << out_path << "\n";
        return 2;
    }
    Drbg rng = seed ? Drbg(*seed) : Drbg::from_os_entropy();
    PublicParams pk = keygen(construction_from_name(construction), capacity,
                             PairingGroup::preset(curve), rng);
    write_file_atomic(out_path, pk.serialize());
    std::cout << "wrote " << out_path << " (" << construction << ", q=" << capacity << ", "
              << curve << ", " << pk.serialize().size() << " bytes)\n";
    return 0;
}

int cmd_build(const std::string& params_path, const std::string& input_path,
              const std::string& chain_dir, const std::string& index, const std::string& policy,
              const std::string& widths, const std::string& qoff, const std::string& qscale,
              unsigned skiplen, unsigned difficulty, const std::string& salt_hex,
              const std::string& reserved) {
    PublicParams pk = PublicParams::deserialize(read_file(params_path));
    ChainConfig cfg;
    cfg.construction = pk.construction;
    cfg.capacity = pk.capacity;
    cfg.curve = pk.group->name();
    cfg.index_kind = index_kind_from_name(index);
    cfg.block_policy = policy;
    cfg.skiplen = static_cast<uint8_t>(skiplen);
    cfg.difficulty = static_cast<uint8_t>(difficulty);
    if (!widths.empty())
        for (const auto& w : split_list(widths))
            cfg.widths.push_back(static_cast<uint8_t>(std::stoul(w)));
    if (!qoff.empty())
        for (const auto& v : split_list(qoff)) cfg.quant_offset.push_back(std::stod(v));
    if (!qscale.empty())
        for (const auto& v : split_list(qscale)) cfg.quant_scale.push_back(std::stod(v));
    if (!salt_hex.empty()) cfg.salt = from_hex(salt_hex);
    if (!reserved.empty()) cfg.reserved_keywords = split_list(reserved);
    std::vector<TemporalObject> objects = parse_jsonl(slurp(input_path), cfg);
    build_chain(chain_dir, cfg, pk, std::move(objects));
    ChainStore store = ChainStore::open(chain_dir);
    std::cout << "built chain at " << chain_dir << ": " << store.block_count()
              << " blocks (incl. genesis), index=" << index << "\n";
    return 0;
}

int cmd_query(const std::string& chain_dir, const std::string& query_text,
              const std::string& vo_path, const std::string& results_path, bool batch,
              bool no_inter, unsigned threads) {
    ChainStore store = ChainStore::open(chain_dir);
    QueryEngine engine(store);
    QueryOptions opt;
    opt.batch = batch;
    opt.use_inter = !no_inter;
    opt.threads = threads;
    QueryOutput out = engine.query_window(engine.compile(query_text), opt);
    for (const auto& o : out.results) std::cout << object_to_json(o).dump() << "\n";
    if (!vo_path.empty()) write_file_atomic(vo_path, out.vo.serialize(*store.group()));
    if (!results_path.empty()) write_results_jsonl(results_path, out.results);
    std::cerr << "results: " << out.results.size()
              << ", vo bytes: " << out.vo.byte_size(*store.group())
              << ", proofs: " << out.stats.prove_calls << ", skips: " << out.stats.skips_taken
              << "\n";
    return 0;
}

int cmd_verify(const std::string& chain_dir, const std::string& query_text,
               const std::string& vo_path, const std::string& results_path, bool as_json) {
    // the verifier sees headers, config, and params only; block bodies stay
    // on the service provider's side
    LightView view = load_light_view(chain_dir);
    HeaderValidation hv = validate_headers(view.headers, view.cfg.difficulty);
    if (!hv.ok) {
        std::cerr << "header validation failed at height " << hv.first_bad << ": " << hv.reason
                  << "\n";
        return 1;
    }
    QuerySpec q = parse_query_text(query_text);
    std::vector<TemporalObject> results =
        results_path.empty() ? std::vector<TemporalObject>{} : read_results_jsonl(results_path);
    VerificationObject vo = VerificationObject::deserialize(read_file(vo_path), *view.pk.group);
    VerifyReport rep = verify_window(view, q, results, vo);
    std::cout << (as_json ? rep.to_json() + "\n" : rep.to_text());
    return rep.accepted ? 0 : 1;
}

int cmd_subscribe(const std::string& chain_dir, const std::string& queries_path,
                  const std::string& mode, unsigned flush_threshold, const std::string& out_dir,
                  bool self_verify) {
    ChainStore store = ChainStore::open(chain_dir);
    SubscriptionEngine engine(store,
                              mode == "lazy" ? SubscriptionEngine::Mode::lazy
                                             : SubscriptionEngine::Mode::realtime,
                              flush_threshold);
    std::vector<uint32_t> ids;
    std::istringstream in(slurp(queries_path));
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        ids.push_back(engine.register_query(line));
    }
    if (!out_dir.empty()) fs::create_directories(out_dir);
    LightView view = load_light_view(chain_dir);
    size_t rejects = 0;
    auto drain = [&]() {
        for (uint32_t id : ids) {
            for (const auto& m : engine.poll(id)) {
                std::cout << "q" << m.query_id << " span [" << m.span_lo << "," << m.span_hi
                          << "] results=" << m.results.size()
                          << " vo_bytes=" << m.vo.byte_size(*store.group());
                if (self_verify) {
                    VerifyReport rep = verify_span(view, parse_query_text(m.vo.query_text),
                                                   m.span_lo, m.span_hi, m.results, m.vo);
                    std::cout << (rep.accepted ? " ACCEPT" : " REJECT:" + rep.reason);
                    if (!rep.accepted) ++rejects;
                }
                std::cout << "\n";
                for (const auto& o : m.results)
                    std::cout << "  " << object_to_json(o).dump() << "\n";
                if (!out_dir.empty()) {
                    std::string base = out_dir + "/q" + std::to_string(m.query_id) + "_" +
                                       std::to_string(m.span_lo) + "_" +
                                       std::to_string(m.span_hi);
                    write_file_atomic(base + ".vo", m.vo.serialize(*store.group()));
                    write_results_jsonl(base + ".jsonl", m.results);
                }
            }
        }
    };
    for (uint64_t h = 1; h <= store.tip(); ++h) {
        engine.feed_block(h);
        drain();
    }
    engine.flush_all();
    drain();
    auto st = engine.stats();
    std::cerr << "blocks: " << st.blocks_processed << ", proofs: " << st.prove_calls
              << ", distinct (node, clause) pairs: " << st.distinct_pairs << "\n";
    return rejects ? 1 : 0;
}

int cmd_stats(const std::string& chain_dir, bool as_json) {
    ChainStore store = ChainStore::open(chain_dir);
    uint64_t total_ads = 0, total_bytes = 0, total_objects = 0;
    nlohmann::json blocks = nlohmann::json::array();
    for (uint64_t h = 0; h < store.block_count(); ++h) {
        Block b = store.load_block(h);
        size_t ads = b.ads_bytes(*store.group());
        size_t raw = b.serialize(*store.group()).size();
        total_ads += ads;
        total_bytes += raw;
        total_objects += b.objects.size();
        if (as_json) {
            blocks.push_back({{"height", h},
                              {"objects", b.objects.size()},
                              {"block_bytes", raw},
                              {"ads_bytes", ads},
                              {"skip_entries", b.skips.size()}});
        } else {
            std::cout << "block " << h << ": objects=" << b.objects.size() << " bytes=" << raw
                      << " ads=" << ads << " skips=" << b.skips.size() << "\n";
        }
    }
    double per_block =
        store.block_count() ? static_cast<double>(total_ads) / store.block_count() : 0.0;
    if (as_json) {
        nlohmann::json j{{"blocks", blocks},
                         {"block_count", store.block_count()},
                         {"objects", total_objects},
                         {"total_bytes", total_bytes},
                         {"total_ads_bytes", total_ads},
                         {"ads_bytes_per_block", per_block},
                         {"index", index_kind_name(store.config().index_kind)},
                         {"construction", construction_name(store.config().construction)}};
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "chain: " << store.block_count() << " blocks, " << total_objects
                  << " objects, index=" << index_kind_name(store.config().index_kind)
                  << ", ads bytes/block=" << per_block << "\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"verifiable Boolean range queries over an append-only block store"};
    app.require_subcommand(1);

    auto* kg = app.add_subcommand("keygen", "run the trusted-setup ceremony");
    std::string kg_construction = "acc1", kg_curve = "ss1024", kg_out = "params.bin";
    uint64_t kg_capacity = 0;
    std::optional<uint64_t> kg_seed;
    kg->add_option("--construction", kg_construction, "acc1 or acc2")->required();
    kg->add_option("--capacity", kg_capacity, "q: acc1 max multiset size / acc2 universe size")
        ->required();
    kg->add_option("--curve", kg_curve, "group preset (ss1024 default, ss256 test-grade)");
    kg->add_option("--seed", kg_seed, "deterministic ceremony seed (test use only)");
    kg->add_option("-o,--out", kg_out, "output file");

    auto* bd = app.add_subcommand("build", "ingest JSONL objects and mine a chain");
    std::string bd_params, bd_input, bd_dir, bd_index = "both", bd_policy = "count:4";
    std::string bd_widths, bd_qoff, bd_qscale, bd_salt, bd_reserved;
    unsigned bd_skiplen = 5, bd_difficulty = 0;
    bd->add_option("--params", bd_params, "params.bin from keygen")->required();
    bd->add_option("--input", bd_input, "JSON-lines objects file")->required();
    bd->add_option("--chain", bd_dir, "chain directory to create")->required();
    bd->add_option("--index", bd_index, "nil, intra, or both");
    bd->add_option("--policy", bd_policy, "block cut policy: count:N or interval:S");
    bd->add_option("--widths", bd_widths, "per-dimension bit widths, e.g. 32,32");
    bd->add_option("--quant-offset", bd_qoff, "per-dimension quantization offsets");
    bd->add_option("--quant-scale", bd_qscale, "per-dimension quantization scales");
    bd->add_option("--skiplen", bd_skiplen, "skip list length (k = 2..2^len)");
    bd->add_option("--difficulty", bd_difficulty, "proof-of-work leading zero bits");
    bd->add_option("--salt", bd_salt, "hex element-encoding salt (default: auto-select)");
    bd->add_option("--reserved", bd_reserved, "extra keywords for the salt collision check");

    auto* qc = app.add_subcommand("query", "run a verifiable time-window query");
    std::string q_dir, q_text, q_vo = "out.vo", q_results;
    bool q_batch = false, q_nointer = false;
    unsigned q_threads = 2;
    qc->add_option("--chain", q_dir, "chain directory")->required();
    qc->add_option("--query", q_text, "query text")->required();
    qc->add_option("--vo", q_vo, "verification object output path");
    qc->add_option("--results", q_results, "results JSONL output path");
    qc->add_flag("--batch", q_batch, "acc2 online batch compaction");
    qc->add_flag("--no-inter", q_nointer, "ignore the inter-block index");
    qc->add_option("--threads", q_threads, "proving worker pool size");

    auto* vf = app.add_subcommand("verify", "light-client verification from headers");
    std::string v_dir, v_text, v_vo, v_results;
    bool v_json = false;
    vf->add_option("--chain", v_dir, "chain directory (headers/meta/params only)")->required();
    vf->add_option("--query", v_text, "query text")->required();
    vf->add_option("--vo", v_vo, "verification object file")->required();
    vf->add_option("--results", v_results, "results JSONL file");
    vf->add_flag("--json", v_json, "machine-readable report");

    auto* sb = app.add_subcommand("subscribe", "replay the chain against subscriptions");
    std::string s_dir, s_queries, s_mode = "realtime", s_out;
    unsigned s_flush = 16;
    bool s_verify = false;
    sb->add_option("--chain", s_dir, "chain directory")->required();
    sb->add_option("--queries", s_queries, "file with one query per line")->required();
    sb->add_option("--mode", s_mode, "realtime or lazy");
    sb->add_option("--flush-threshold", s_flush, "lazy mode: max buffered blocks");
    sb->add_option("--out", s_out, "directory for per-message VO/result files");
    sb->add_flag("--verify", s_verify, "self-verify each message");

    auto* st = app.add_subcommand("stats", "per-block ADS sizes and counters");
    std::string st_dir;
    bool st_json = false;
    st->add_option("--chain", st_dir, "chain directory")->required();
    st->add_flag("--json", st_json, "machine-readable output");

    try {
        app.parse(argc, argv);
        if (kg->parsed())
            return cmd_keygen(kg_construction, kg_capacity, kg_curve, kg_seed, kg_out);
        if (bd->parsed())
            return cmd_build(bd_params, bd_input, bd_dir, bd_index, bd_policy, bd_widths, bd_qoff,
                             bd_qscale, bd_skiplen, bd_difficulty, bd_salt, bd_reserved);
        if (qc->parsed())
            return cmd_query(q_dir, q_text, q_vo, q_results, q_batch, q_nointer, q_threads);
        if (vf->parsed()) return cmd_verify(v_dir, v_text, v_vo, v_results, v_json);
        if (sb->parsed()) return cmd_subscribe(s_dir, s_queries, s_mode, s_flush, s_out, s_verify);
        if (st->parsed()) return cmd_stats(st_dir, st_json);
        return 2;
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    } catch (const ParseError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const DomainError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const NotFoundError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const UnsupportedError& e) {
        std::cerr << "input error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
}
