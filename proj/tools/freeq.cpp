// freeq - tools/freeq.cpp
// CLI binding the pipeline: build graphs, answer queries, run evaluations,
// generate synthetic scenes.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>

#include "freeq/agents.hpp"
#include "freeq/config.hpp"
#include "freeq/embeddings.hpp"
#include "freeq/eval.hpp"
#include "freeq/io.hpp"
#include "freeq/parallel.hpp"
#include "freeq/reasoning.hpp"
#include "freeq/scenegraph.hpp"

namespace fs = std::filesystem;
using namespace freeq;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitPipeline = 3;
constexpr int kExitProvider = 4;

struct Providers {
    std::unique_ptr<agents::AgentProvider> agent;
    std::unique_ptr<EmbeddingProvider> embedder;
};

std::string default_truth_path(const RunConfig& config) {
    if (!config.truth_path.empty()) return config.truth_path;
    if (!config.scene_path.empty())
        return (fs::path(config.scene_path).parent_path() / "planted.json").string();
    if (!config.graph_path.empty())
        return (fs::path(config.graph_path).parent_path() / "planted.json").string();
    throw FormatError("oracle provider needs --truth (or a scene/graph to locate planted.json)");
}

Providers make_providers(const RunConfig& config) {
    Providers p;
    if (config.provider == "mock") {
        p.agent = config.fixture_path.empty()
                      ? std::make_unique<agents::MockProvider>()
                      : std::make_unique<agents::MockProvider>(
                            agents::MockProvider::from_fixture_file(config.fixture_path));
    } else if (config.provider == "oracle") {
        p.agent = std::make_unique<eval::OracleProvider>(
            eval::load_planted_truth(default_truth_path(config)));
    } else if (config.provider == "replay") {
        p.agent = std::make_unique<agents::ReplayProvider>(
            agents::ReplayProvider::from_log_file(config.transcripts_path));
    } else if (config.provider == "http") {
        agents::EndpointConfig endpoint = agents::EndpointConfig::from_env();
        if (!config.api_base.empty()) endpoint.api_base = config.api_base;
        if (!config.api_key.empty()) endpoint.api_key = config.api_key;
        if (!config.model.empty()) endpoint.model = config.model;
        p.agent = std::make_unique<agents::HttpProvider>(endpoint);
    }
    p.embedder = std::make_unique<MockEmbeddingProvider>(64, config.seed);
    return p;
}

void write_with_config_echo(const RunConfig& config, const std::string& path,
                            const std::string& contents) {
    io::atomic_write_file(path, contents);
    io::atomic_write_file(path + ".config.txt", config.echo());
}

int run_build(const RunConfig& config) {
    config.validate();
    if (config.scene_path.empty()) throw FormatError("build needs --scene");
    const SceneCapture capture = io::load_manifest(config.scene_path);
    const Providers providers = make_providers(config);

    PipelineConfig pipeline;
    pipeline.merge = config.merge;
    pipeline.assoc = config.assoc;

    agents::TranscriptLog log;
    const SceneGraph graph =
        build_graph(capture, pipeline, *providers.agent, *providers.embedder, &log);

    const std::string out = config.out_path.empty()
                                ? (fs::path(config.scene_path).parent_path() / "graph.json")
                                      .string()
                                : config.out_path;
    write_with_config_echo(config, out, serialize_graph(graph));
    if (!config.transcripts_path.empty() && config.provider != "replay")
        log.save_jsonl(config.transcripts_path);
    std::cout << out << "\n";
    return kExitOk;
}

struct BatchQuery {
    std::string query_id;
    std::string text;
};

std::vector<BatchQuery> load_batch(const std::string& path) {
    std::istringstream in(io::read_file(path));
    std::vector<BatchQuery> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        out.push_back({j.at("query_id").get<std::string>(), j.at("text").get<std::string>()});
    }
    return out;
}

int run_query(const RunConfig& config) {
    config.validate();
    if (config.graph_path.empty()) throw FormatError("query needs --graph");
    const SceneGraph graph = parse_graph(io::read_file(config.graph_path));
    const Providers providers = make_providers(config);

    std::vector<BatchQuery> batch;
    if (!config.batch_path.empty())
        batch = load_batch(config.batch_path);
    else if (!config.query_text.empty())
        batch.push_back({"q0", config.query_text});
    else
        throw FormatError("query needs --query or --batch");

    struct Result {
        std::string line;
        bool ok = false;
        std::vector<agents::AgentTranscript> transcripts;
    };
    std::vector<Result> results(batch.size());

    parallel::parallel_for(static_cast<std::int64_t>(batch.size()), [&](std::int64_t i) {
        agents::TranscriptLog local_log;
        Result& r = results[i];
        io::JsonWriter w;
        w.begin_object();
        w.key("query_id");
        w.value_string(batch[i].query_id);
        try {
            const Answer answer = answer_query({batch[i].text}, graph, *providers.agent,
                                               &local_log, {}, providers.embedder.get());
            w.key("target_id");
            w.value_int(answer.target_id);
            w.key("box");
            w.begin_object();
            w.key("min");
            w.begin_array();
            w.value_double(answer.target_box.lo.x);
            w.value_double(answer.target_box.lo.y);
            w.value_double(answer.target_box.lo.z);
            w.end_array();
            w.key("max");
            w.begin_array();
            w.value_double(answer.target_box.hi.x);
            w.value_double(answer.target_box.hi.y);
            w.value_double(answer.target_box.hi.z);
            w.end_array();
            w.end_object();
            if (config.explain) {
                w.key("rationale");
                w.value_string(answer.rationale);
                w.key("transcript_digests");
                w.begin_array();
                for (const auto& t : answer.transcripts)
                    w.value_string(hash_hex(t.request_hash));
                w.end_array();
            }
            r.ok = true;
        } catch (const Error& e) {
            w.key("error");
            w.value_string(e.what());
        }
        w.end_object();
        r.line = w.str();
        r.transcripts = local_log.snapshot();
    });

    std::string out_stream;
    int ok_count = 0;
    agents::TranscriptLog merged;
    for (const Result& r : results) {
        out_stream += r.line;
        out_stream += '\n';
        ok_count += r.ok;
        for (const auto& t : r.transcripts) merged.append(t);
    }
    if (!config.out_path.empty())
        write_with_config_echo(config, config.out_path, out_stream);
    else
        std::cout << out_stream;
    if (!config.transcripts_path.empty() && config.provider != "replay")
        merged.save_jsonl(config.transcripts_path);
    if (ok_count == 0) throw Error("every query failed");
    return kExitOk;
}

// Node id -> planted object index by maximal point overlap.
std::map<int, int> proposal_map_from_overlap(const SceneGraph& graph,
                                             const eval::PlantedTruth& truth) {
    std::map<int, int> out;
    for (const Node& node : graph.nodes) {
        int best_obj = -1, best_overlap = 0;
        for (size_t o = 0; o < truth.objects.size(); ++o) {
            const int lo = truth.objects[o].point_start;
            const int hi = lo + truth.objects[o].point_count;
            int overlap = 0;
            for (int p : node.point_indices) overlap += (p >= lo && p < hi);
            if (overlap > best_overlap) {
                best_overlap = overlap;
                best_obj = static_cast<int>(o);
            }
        }
        out[node.id] = best_obj;
    }
    return out;
}

int run_eval(const RunConfig& config, const std::string& task, const std::string& answers_path,
             const std::string& gt_graph_path) {
    config.validate();
    eval::EvalReport report;
    report.config_echo = config.echo();

    if (task == "grounding") {
        if (answers_path.empty() || config.batch_path.empty())
            throw FormatError("eval grounding needs --answers and --batch");
        std::vector<eval::BoxSample> predictions, gts;
        std::vector<eval::TargetSample> targets;
        {
            std::istringstream in(io::read_file(answers_path));
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line);
                if (j.contains("error")) continue;
                eval::BoxSample s;
                s.query_id = j.at("query_id").get<std::string>();
                const auto lo = j.at("box").at("min").get<std::vector<double>>();
                const auto hi = j.at("box").at("max").get<std::vector<double>>();
                s.box = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
                predictions.push_back(s);
                targets.push_back({s.query_id, j.value("target_id", -1)});
            }
        }
        {
            std::istringstream in(io::read_file(config.batch_path));
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty()) continue;
                nlohmann::json j = nlohmann::json::parse(line);
                eval::BoxSample s;
                s.query_id = j.at("query_id").get<std::string>();
                const auto lo = j.at("gt_box").at("min").get<std::vector<double>>();
                const auto hi = j.at("gt_box").at("max").get<std::vector<double>>();
                s.box = {{lo[0], lo[1], lo[2]}, {hi[0], hi[1], hi[2]}};
                gts.push_back(s);
            }
        }
        const auto accuracy = eval::grounding_accuracy(predictions, gts, {0.25, 0.5});
        report.metrics["acc@0.25"] = accuracy.at(0.25);
        report.metrics["acc@0.5"] = accuracy.at(0.5);
        {
            std::map<std::string, const Box3D*> gt_by_id;
            for (const auto& s : gts) gt_by_id[s.query_id] = &s.box;
            for (const auto& p : predictions)
                report.per_sample.push_back({p.query_id, box_iou(p.box, *gt_by_id.at(p.query_id))});
        }

        // Top-1 against ground-truth proposals when the truth record and the
        // graph are available.
        if (!config.graph_path.empty()) {
            const eval::PlantedTruth truth =
                eval::load_planted_truth(default_truth_path(config));
            const SceneGraph graph = parse_graph(io::read_file(config.graph_path));
            std::map<std::string, int> gt_proposals;
            for (const auto& q : truth.queries) gt_proposals[q.query_id] = q.gt_object;
            report.metrics["top1_gt_boxes"] = eval::top1_with_gt_boxes(
                targets, gt_proposals, proposal_map_from_overlap(graph, truth));
        }
    } else if (task == "seg") {
        if (config.graph_path.empty()) throw FormatError("eval seg needs --graph");
        const eval::PlantedTruth truth = eval::load_planted_truth(default_truth_path(config));
        const SceneGraph graph = parse_graph(io::read_file(config.graph_path));
        MockEmbeddingProvider embedder(64, config.seed);

        int point_count = 0;
        std::set<std::string> class_set;
        for (const auto& o : truth.objects) {
            point_count = std::max(point_count, o.point_start + o.point_count);
            class_set.insert(o.category);
        }
        std::vector<std::string> classes(class_set.begin(), class_set.end());
        std::vector<std::string> gt(point_count, "background");
        for (const auto& o : truth.objects)
            for (int p = o.point_start; p < o.point_start + o.point_count; ++p)
                gt[p] = o.category;

        const auto predicted = eval::semantic_segment(graph, point_count, classes, embedder);
        const auto metrics = eval::segmentation_metrics(predicted, gt, classes);
        report.metrics["mAcc"] = metrics.mAcc;
        report.metrics["mIoU"] = metrics.mIoU;
        report.metrics["fmIoU"] = metrics.fmIoU;
        int correct = 0;
        for (size_t p = 0; p < gt.size(); ++p) correct += (predicted[p] == gt[p]);
        report.metrics["point_accuracy"] =
            gt.empty() ? 0.0 : static_cast<double>(correct) / gt.size();
        for (const std::string& c : classes) {
            const auto single = eval::segmentation_metrics(predicted, gt, {c});
            report.per_sample.push_back({"iou:" + c, single.mIoU});
        }
    } else if (task == "sg") {
        if (config.graph_path.empty()) throw FormatError("eval sg needs --graph");
        const SceneGraph predicted = parse_graph(io::read_file(config.graph_path));
        SceneGraph gt_graph;
        MockEmbeddingProvider embedder(64, config.seed);
        if (!gt_graph_path.empty()) {
            gt_graph = parse_graph(io::read_file(gt_graph_path));
        } else {
            const eval::PlantedTruth truth =
                eval::load_planted_truth(default_truth_path(config));
            gt_graph = eval::planted_ground_truth_graph(truth, embedder);
        }
        const auto recall = eval::scene_graph_recall(predicted, gt_graph, {1, 5, 10}, {3, 5},
                                                     {50, 100}, embedder);
        for (const auto& [name, value] : recall) report.metrics[name] = value;
    } else {
        throw FormatError("eval task must be grounding|seg|sg");
    }

    std::cout << report.to_table();
    if (!config.out_path.empty()) io::atomic_write_file(config.out_path, report.to_json());
    return kExitOk;
}

int run_gen(const RunConfig& config, int objects, int frames, int queries) {
    if (config.out_path.empty()) throw FormatError("gen needs --out directory");
    eval::PlantedConfig planted;
    planted.object_count = objects;
    planted.frame_count = frames;
    planted.query_count = queries;
    const eval::PlantedScene scene = eval::generate_planted_scene(config.seed, planted);
    const std::string manifest = eval::write_planted_scene(scene, config.out_path);
    io::atomic_write_file((fs::path(config.out_path) / "gen.config.txt").string(),
                          config.echo());
    std::cout << manifest << "\n";
    return kExitOk;
}

int dispatch(int argc, char** argv) {
    CLI::App app{"Scene-graph construction and free-form querying over posed RGB-D captures"};
    app.require_subcommand(1);

    RunConfig config;
    std::string config_file;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_file, "flat key = value config file");
        cmd->add_option("--provider", config.provider, "mock|oracle|http|replay");
        cmd->add_option("--seed", config.seed, "deterministic seed");
        cmd->add_option("--jobs", config.jobs, "worker threads (0 = default)");
        cmd->add_option("--out", config.out_path, "output path");
        cmd->add_option("--truth", config.truth_path, "planted.json for the oracle provider");
        cmd->add_option("--fixture", config.fixture_path, "mock fixture file");
        cmd->add_option("--transcripts", config.transcripts_path,
                        "transcript log to record (or replay from)");
        cmd->add_option("--api-base", config.api_base, "chat-completions endpoint base");
        cmd->add_option("--api-key", config.api_key, "bearer token");
        cmd->add_option("--model", config.model, "model name");
        cmd->add_option("--tau-iou", config.merge.tau_iou, "visibility gate IoU threshold");
        cmd->add_option("--tau-sim", config.merge.tau_sim, "post-merge label cosine gate");
        cmd->add_option("--top-k-views", config.merge.top_k_views, "views per superpoint vote");
        cmd->add_option("--z-tolerance", config.merge.z_tolerance, "depth test tolerance (m)");
        cmd->add_option("--graphcut-k", config.merge.graphcut_k, "k-NN graph degree");
        cmd->add_option("--graphcut-kappa", config.merge.graphcut_kappa,
                        "segmentation scale parameter");
        cmd->add_option("--voxel-size", config.assoc.voxel_size, "association voxel (m)");
        cmd->add_option("--nn-threshold", config.assoc.nn_threshold,
                        "association neighbor radius (m)");
        cmd->add_option("--assoc-threshold", config.assoc.assoc_threshold,
                        "association score threshold");
        cmd->add_flag("-v,--verbose", config.verbosity, "verbosity");
    };

    auto* build = app.add_subcommand("build", "build a scene graph from a manifest");
    build->add_option("--scene", config.scene_path, "scene manifest JSON")->required();
    add_common(build);

    auto* query = app.add_subcommand("query", "answer queries over a graph");
    query->add_option("--graph", config.graph_path, "scene graph JSON")->required();
    query->add_option("--query", config.query_text, "single query text");
    query->add_option("--batch", config.batch_path, "query batch JSON-lines");
    query->add_flag("--explain", config.explain, "add rationale and transcript digests");
    add_common(query);

    std::string eval_task, answers_path, gt_graph_path;
    auto* evaluate = app.add_subcommand("eval", "run an evaluation task");
    evaluate->add_option("--task", eval_task, "grounding|seg|sg")->required();
    evaluate->add_option("--graph", config.graph_path, "predicted graph JSON");
    evaluate->add_option("--answers", answers_path, "answers JSON-lines");
    evaluate->add_option("--batch", config.batch_path, "query batch with gt boxes");
    evaluate->add_option("--gt-graph", gt_graph_path, "ground-truth graph JSON");
    add_common(evaluate);

    int objects = 4, frames = 4, queries = 20;
    auto* gen = app.add_subcommand("gen", "generate a planted synthetic scene");
    gen->add_option("--objects", objects, "object count (>= 2)");
    gen->add_option("--frames", frames, "frame count (>= 2)");
    gen->add_option("--queries", queries, "query count");
    add_common(gen);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitConfig;
    }

    try {
        // Config-file values fill in every field whose flag was not passed;
        // explicitly passed flags win.
        if (!config_file.empty()) {
            CLI::App* sub = app.get_subcommands().front();
            for (const auto& [key, value] : parse_config_file(io::read_file(config_file))) {
                std::string flag = "--" + key;
                std::replace(flag.begin(), flag.end(), '_', '-');
                const CLI::Option* opt = nullptr;
                try {
                    opt = sub->get_option(flag);
                } catch (const CLI::OptionNotFound&) {
                    opt = nullptr;
                }
                if (opt != nullptr && opt->count() > 0) continue;
                config.apply_file_value(key, value);
            }
        }

        if (config.jobs > 0) parallel::set_threads(config.jobs);

        if (build->parsed()) return run_build(config);
        if (query->parsed()) return run_query(config);
        if (evaluate->parsed()) return run_eval(config, eval_task, answers_path, gt_graph_path);
        if (gen->parsed()) return run_gen(config, objects, frames, queries);
        return kExitConfig;
    } catch (const ProviderUnavailable& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const AuthError& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const RateLimited& e) {
        std::cerr << "provider error: " << e.what() << "\n";
        return kExitProvider;
    } catch (const FormatError& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "io error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const Error& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return kExitPipeline;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitPipeline;
    }
}

}  // namespace

int main(int argc, char** argv) { return dispatch(argc, argv); }
