// scriptenc: command-line surface over the library.
//
//   parse | ingest | train | evaluate | eval-sim | descriptors | trajectories | synth
//
// Failures print one line, `error code=<Code> message="<text>"`, and exit 2
// for usage problems or 1 for data problems.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "scriptenc/checkpoint.hpp"
#include "scriptenc/classifier.hpp"
#include "scriptenc/corpus.hpp"
#include "scriptenc/descriptors.hpp"
#include "scriptenc/error.hpp"
#include "scriptenc/evaluation.hpp"
#include "scriptenc/io.hpp"
#include "scriptenc/parallel.hpp"
#include "scriptenc/pipeline.hpp"
#include "scriptenc/screenplay.hpp"
#include "scriptenc/synth.hpp"
#include "scriptenc/text.hpp"
#include "scriptenc/trajectories.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace scriptenc;

namespace {

// Raised for malformed flag values; exits 2 like CLI11's own parse errors.
struct UsageError : Error {
  using Error::Error;
};

template <typename F>
auto flag_value(F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(e.code(), e.what());
  }
}

std::string default_out_dir() {
  if (const char* env = std::getenv("SCRIPTENC_OUT"); env != nullptr && *env != '\0') return env;
  return "scriptenc_out";
}

void write_json(const fs::path& path, const json& j) { io::write_file_atomic(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error("MalformedManifest", path.string() + ": " + e.what());
  }
}

std::string hash_of(const json& config) { return corpus::config_hash(config); }

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("WriteFailed", "cannot create '" + dir.string() + "': " + ec.message());
}

// ---- shared option groups ----------------------------------------------------------------

struct Common {
  std::uint64_t seed = 13;
  std::string out;
  std::size_t workers = 0;

  void add(CLI::App* app) {
    out = default_out_dir();
    app->add_option("--seed", seed, "random seed")->capture_default_str();
    app->add_option("--out", out, "output directory (default: $SCRIPTENC_OUT or ./scriptenc_out)");
    app->add_option("--workers", workers, "worker threads (0: hardware concurrency)");
  }
};

struct CorpusOpts {
  std::string scripts, tags, embeddings, loglines;
  corpus::CorpusConfig config;
  std::optional<std::uint64_t> split_seed;

  void add(CLI::App* app, bool required) {
    auto* s = app->add_option("--scripts", scripts, "directory of screenplay .txt files");
    auto* t = app->add_option("--tags", tags, "tags JSON: {title: {attribute: [tags]}}");
    auto* e = app->add_option("--embeddings", embeddings, "word vectors, GloVe text layout");
    if (required) {
      s->required();
      t->required();
      e->required();
    }
    app->add_option("--loglines", loglines, "loglines JSON: {title: text}");
    app->add_option("--heldout-fraction", config.heldout_fraction)->capture_default_str();
    app->add_option("--validation-fraction", config.validation_fraction)->capture_default_str();
    app->add_option("--min-count", config.min_count, "vocabulary count threshold")->capture_default_str();
    app->add_option("--scene-cap", config.scene_cap, "maximum statements per scene")->capture_default_str();
    app->add_option("--embedding-dim", config.embedding_dim)->capture_default_str();
    app->add_option("--split-seed", split_seed, "seed for the split (default: --seed)");
  }

  void finish(const Common& common) {
    config.seed = split_seed.value_or(common.seed);
    config.workers = common.workers;
  }

  json paths() const {
    return {{"scripts", scripts}, {"tags", tags}, {"embeddings", embeddings}, {"loglines", loglines}};
  }

  // Fills unset paths from a previous run's configuration.
  void inherit(const json& previous_paths) {
    auto take = [&](std::string& field, const char* key) {
      if (field.empty()) field = previous_paths.value(key, std::string());
    };
    take(scripts, "scripts");
    take(tags, "tags");
    take(embeddings, "embeddings");
    take(loglines, "loglines");
  }
};

struct LoadedCorpus {
  corpus::Corpus corpus;
  text::EmbeddingTable embeddings;
};

LoadedCorpus load_corpus(const CorpusOpts& opts) {
  if (opts.scripts.empty() || opts.tags.empty() || opts.embeddings.empty()) {
    throw UsageError("MissingArgument", "--scripts, --tags and --embeddings are required");
  }
  LoadedCorpus out;
  out.embeddings = text::EmbeddingTable::load(opts.embeddings, opts.config.embedding_dim);
  const auto tags = corpus::load_tags(opts.tags);
  const auto loglines = opts.loglines.empty() ? corpus::LoglinesFile{} : corpus::load_loglines(opts.loglines);
  out.corpus = corpus::ingest(opts.scripts, tags, loglines, opts.config);
  if (out.corpus.entries.empty()) throw Error("EmptyCorpus", "no usable scripts after filtering");
  for (const auto& x : out.corpus.excluded) {
    std::cerr << "excluded " << x.title << ": " << x.reason << "\n";
  }
  return out;
}

std::vector<std::size_t> split_entries(const corpus::Corpus& c, const std::string& split) {
  if (split == "train") return c.train;
  if (split == "validation") return c.validation;
  if (split == "heldout") return c.heldout;
  if (split == "all") {
    std::vector<std::size_t> all(c.entries.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    return all;
  }
  throw UsageError("UnknownSplit", "unknown split '" + split + "' (train, validation, heldout, all)");
}

// A trained tagger restored from a `train` output directory.
struct Restored {
  json manifest;
  LoadedCorpus data;
  std::unique_ptr<pipeline::Tagger> tagger;
  std::vector<std::string> tags;
  std::set<std::string> inactive;  // tags left out of training, and so of F-1
  std::string attribute;
};

Restored restore(const fs::path& checkpoint_dir, CorpusOpts opts, const Common& common) {
  Restored r;
  r.manifest = read_json(checkpoint_dir / "manifest.json");
  const json& cfg = r.manifest.at("config");
  opts.inherit(cfg.at("paths"));
  const json& cc = cfg.at("corpus");
  opts.config.heldout_fraction = cc.at("heldout_fraction").get<double>();
  opts.config.validation_fraction = cc.at("validation_fraction").get<double>();
  opts.config.min_count = cc.at("min_count").get<std::size_t>();
  opts.config.scene_cap = cc.at("scene_cap").get<std::size_t>();
  opts.config.embedding_dim = cc.at("embedding_dim").get<std::size_t>();
  opts.config.seed = cc.at("seed").get<std::uint64_t>();
  opts.config.workers = common.workers;
  r.data = load_corpus(opts);

  const std::string expected = r.manifest.at("vocabulary_hash").get<std::string>();
  if (r.data.corpus.vocab.hash() != expected) {
    throw Error("VocabularyMismatch", "corpus vocabulary hash " + r.data.corpus.vocab.hash() +
                                          " differs from the checkpoint's " + expected);
  }
  r.attribute = cfg.at("attribute").get<std::string>();
  r.tags = r.manifest.at("tags").get<std::vector<std::string>>();
  for (const auto& t : r.manifest.at("taxonomy"))
    if (!t.at("active").get<bool>()) r.inactive.insert(t.at("tag").get<std::string>());
  const auto spec = pipeline::TaggerSpec::from_json(cfg.at("model"));
  r.tagger = std::make_unique<pipeline::Tagger>(spec, r.data.corpus, r.data.embeddings, r.tags.size(),
                                                cfg.at("seed").get<std::uint64_t>());
  checkpoint::apply(checkpoint::load(checkpoint_dir / "checkpoint.bin"), r.tagger->params());
  return r;
}

std::vector<double> parse_cutoffs(const std::string& text) {
  std::vector<double> out;
  for (const auto& part : io::split(text, ',')) {
    const auto t = io::trim(part);
    if (t.empty()) continue;
    out.push_back(flag_value([&] { return io::parse_double(t); }));
  }
  if (out.empty()) throw UsageError("InvalidCutoff", "no cutoffs given");
  return out;
}

// ---- commands ----------------------------------------------------------------------------

struct ParseCmd {
  Common common;
  std::string input;
  std::size_t scene_cap = 0;
  screenplay::ParserConfig parser;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("parse", "parse screenplays into TSV tables");
    common.add(app);
    app->add_option("--input", input, "a screenplay .txt file or a directory of them")->required();
    app->add_option("--scene-cap", scene_cap, "split scenes longer than this (0: keep)")->capture_default_str();
    app->add_option("--tab-width", parser.tab_width)->capture_default_str();
    app->add_option("--character-indent", parser.character_indent)->capture_default_str();
    app->add_option("--dialogue-indent", parser.dialogue_indent)->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() {
    std::vector<fs::path> files;
    const bool single = fs::is_regular_file(input);
    if (single) {
      files.push_back(input);
    } else if (fs::is_directory(input)) {
      for (const auto& e : fs::directory_iterator(input))
        if (e.is_regular_file() && e.path().extension() == ".txt") files.push_back(e.path());
      std::sort(files.begin(), files.end());
    } else {
      throw Error("FileNotFound", "no such file or directory '" + input + "'");
    }
    const json config = {{"command", "parse"},
                         {"scene_cap", scene_cap},
                         {"tab_width", parser.tab_width},
                         {"character_indent", parser.character_indent},
                         {"dialogue_indent", parser.dialogue_indent},
                         {"max_cue_length", parser.max_cue_length},
                         {"heading_prefixes", parser.heading_prefixes}};
    ensure_dir(common.out);

    struct Outcome {
      json report;
      std::string tsv;
      std::string code, message;
    };
    std::vector<Outcome> outcomes(files.size());
    parallel_for(
        files.size(),
        [&](std::size_t i) {
          auto& o = outcomes[i];
          try {
            auto result = screenplay::parse_script(
                screenplay::RawScript::from_text(files[i].stem().string(), io::read_file(files[i])), parser);
            auto sp = scene_cap > 0 ? screenplay::split_long_scenes(result.screenplay, scene_cap) : result.screenplay;
            o.report = result.report.to_json();
            o.tsv = screenplay::write_tsv(screenplay::to_table(sp));
          } catch (const Error& e) {
            o.code = e.code();
            o.message = e.what();
          }
        },
        common.workers);

    json scripts = json::array();
    for (std::size_t i = 0; i < files.size(); ++i) {
      const auto title = files[i].stem().string();
      const auto& o = outcomes[i];
      if (!o.code.empty()) {
        if (single) throw Error(o.code, o.message);
        scripts.push_back({{"title", title}, {"error", o.code}, {"message", o.message}});
        continue;
      }
      io::write_file_atomic(fs::path(common.out) / (title + ".tsv"), o.tsv);
      scripts.push_back({{"title", title}, {"tsv", title + ".tsv"}, {"report", o.report}});
    }
    write_json(fs::path(common.out) / "parse_manifest.json",
               {{"config", config}, {"config_hash", hash_of(config)}, {"seed", common.seed}, {"scripts", scripts}});
    std::cout << "parsed " << files.size() << " script(s) into " << common.out << "\n";
  }
};

struct IngestCmd {
  Common common;
  CorpusOpts corpus;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("ingest", "parse, filter and split a corpus; write its manifest");
    common.add(app);
    corpus.add(app, true);
    app->callback([this] { run(); });
  }

  void run() {
    corpus.finish(common);
    auto data = load_corpus(corpus);
    const auto& c = data.corpus;
    json manifest = c.manifest(corpus.config);
    std::size_t covered = 0;
    for (const auto& tok : c.vocab.tokens())
      if (data.embeddings.find(tok) != nullptr) ++covered;
    manifest["paths"] = corpus.paths();
    manifest["embedding_coverage"] = covered;
    ensure_dir(common.out);
    write_json(fs::path(common.out) / "corpus_manifest.json", manifest);
    std::string vocab;
    for (const auto& tok : c.vocab.tokens()) vocab += tok + "\n";
    io::write_file_atomic(fs::path(common.out) / "vocabulary.txt", vocab);
    std::cout << "ingested " << c.entries.size() << " script(s), excluded " << c.excluded.size() << ", vocabulary "
              << c.vocab.size() << "\n";
  }
};

struct TrainCmd {
  Common common;
  CorpusOpts corpus;
  std::string attribute;
  std::vector<std::string> variants;
  std::string attention_norm = "softmax";
  std::size_t hidden = 50;
  bool chars = false;
  std::size_t char_dim = 10;
  std::string loss = "weighted";
  bool log_wallclock = false;
  classifier::TrainConfig train;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("train", "train a tag classifier");
    common.add(app);
    corpus.add(app, true);
    app->add_option("--attribute", attribute, "tag attribute to predict, e.g. genre")->required();
    app->add_option("--variant", variants,
                    "model variant (full, plus_chars, minus_action, minus_dialogue, two_tier, han), encoder kind "
                    "(boe, boe_attn, gru, gru_attn) or logline; repeatable")
        ->take_all();
    app->add_option("--attention-norm", attention_norm, "softmax or linear")->capture_default_str();
    app->add_option("--hidden", hidden, "GRU units per direction")->capture_default_str();
    app->add_flag("--chars", chars, "append the character block to scene embeddings");
    app->add_option("--char-dim", char_dim)->capture_default_str();
    app->add_option("--epochs", train.max_epochs)->capture_default_str();
    app->add_option("--patience", train.patience)->capture_default_str();
    app->add_option("--lr", train.lr)->capture_default_str();
    app->add_option("--max-norm", train.max_norm)->capture_default_str();
    app->add_option("--threshold", train.threshold)->capture_default_str();
    app->add_option("--loss", loss, "weighted or printed")->capture_default_str();
    app->add_flag("--log-wallclock", log_wallclock, "record wall-clock seconds in the log (not byte-stable)");
    app->callback([this] { run(); });
  }

  void run() {
    corpus.finish(common);
    pipeline::TaggerSpec spec;
    spec.model.encoder.input_dim = corpus.config.embedding_dim;
    spec.model.encoder.hidden_per_direction = hidden;
    spec.model.encoder.attention_normalization =
        flag_value([&] { return encoders::parse_attention_norm(attention_norm); });
    spec.model.characters = chars;
    spec.model.character_dim = char_dim;
    for (const auto& v : variants) flag_value([&] { pipeline::apply_variant_flag(spec, v); return 0; });
    spec.model.encoder.attention_dim = spec.model.encoder.attended_dim();
    if (loss == "weighted") {
      train.loss_form = classifier::LossForm::Weighted;
    } else if (loss == "printed") {
      train.loss_form = classifier::LossForm::Printed;
    } else {
      throw UsageError("UnknownLoss", "unknown loss form '" + loss + "' (weighted, printed)");
    }
    train.seed = common.seed;
    train.record_wallclock = log_wallclock;

    json corpus_cfg = corpus.config.to_json();
    const json config = {{"command", "train"},
                         {"seed", common.seed},
                         {"attribute", attribute},
                         {"paths", corpus.paths()},
                         {"corpus", corpus_cfg},
                         {"model", spec.to_json()},
                         {"train",
                          {{"lr", train.lr},
                           {"max_norm", train.max_norm},
                           {"max_epochs", train.max_epochs},
                           {"patience", train.patience},
                           {"threshold", train.threshold},
                           {"loss", loss},
                           {"log_wallclock", log_wallclock}}}};
    const std::string hash = hash_of(config);

    auto data = load_corpus(corpus);
    const auto tags = pipeline::attribute_tags(data.corpus, attribute);
    pipeline::Tagger tagger(spec, data.corpus, data.embeddings, tags.size(), common.seed);
    auto trained = pipeline::train_tagger(tagger, data.corpus, attribute, train);
    for (const auto& t : pipeline::inactive_tags(trained.tags, trained.taxonomy)) {
      std::cerr << "warning: tag '" << t << "' has no positive or no negative training script; it is left out of "
                << "the loss and of F-1\n";
    }

    const fs::path out(common.out);
    ensure_dir(out);
    checkpoint::save(out / "checkpoint.bin", tagger.params());
    io::write_file_atomic(out / "train_log.csv", classifier::log_csv(trained.result.log));
    json taxonomy = json::array();
    for (std::size_t j = 0; j < trained.tags.size(); ++j) {
      taxonomy.push_back({{"tag", trained.tags[j]},
                          {"ratio", trained.taxonomy.ratios[j]},
                          {"active", static_cast<bool>(trained.taxonomy.active[j])}});
    }
    write_json(out / "manifest.json", {{"config", config},
                                       {"config_hash", hash},
                                       {"seed", common.seed},
                                       {"vocabulary_hash", data.corpus.vocab.hash()},
                                       {"vocabulary_size", data.corpus.vocab.size()},
                                       {"tags", trained.tags},
                                       {"taxonomy", taxonomy},
                                       {"best_epoch", trained.result.best_epoch},
                                       {"best_val_ap", trained.result.best_val_ap},
                                       {"epochs_run", trained.result.epochs_run},
                                       {"artifacts", {"checkpoint.bin", "train_log.csv"}}});
    std::cout << "trained " << attribute << " tagger for " << trained.result.epochs_run << " epoch(s), best epoch "
              << trained.result.best_epoch << " (val AP " << trained.result.best_val_ap << ")\n";
  }
};

std::string variant_label(const json& model) {
  if (model.value("logline", false)) return "logline";
  return model.at("variant").get<std::string>() + "/" + model.at("kind").get<std::string>();
}

struct EvaluateCmd {
  Common common;
  CorpusOpts corpus;
  std::string checkpoint_dir;
  std::string split = "heldout";

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("evaluate", "micro F-1 of a trained tagger");
    common.add(app);
    corpus.add(app, false);
    app->add_option("--checkpoint", checkpoint_dir, "output directory of `train`")->required();
    app->add_option("--split", split, "train, validation, heldout or all")->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() {
    auto r = restore(checkpoint_dir, corpus, common);
    const auto entries = pipeline::covered(*r.tagger, split_entries(r.data.corpus, split));
    if (entries.empty()) throw Error("EmptySplit", "no scripts to evaluate in split '" + split + "'");
    const double threshold = r.manifest.at("config").at("train").at("threshold").get<double>();
    auto predicted = pipeline::predict_sets(*r.tagger, r.tags, entries, threshold);
    auto gold = pipeline::gold_sets(r.data.corpus, r.attribute, entries);
    pipeline::drop_tags(predicted, r.inactive);
    pipeline::drop_tags(gold, r.inactive);
    const auto counts = evaluation::micro_counts(predicted, gold);

    const json config = {{"command", "evaluate"},
                         {"checkpoint_config_hash", r.manifest.at("config_hash")},
                         {"split", split},
                         {"seed", common.seed}};
    const json report = {{"config", config},
                         {"config_hash", hash_of(config)},
                         {"attribute", r.attribute},
                         {"variant", variant_label(r.manifest.at("config").at("model"))},
                         {"scripts", entries.size()},
                         {"excluded_tags", r.inactive},
                         {"tp", counts.tp},
                         {"fp", counts.fp},
                         {"fn", counts.fn},
                         {"precision", counts.precision()},
                         {"recall", counts.recall()},
                         {"f1", counts.f1()}};
    ensure_dir(common.out);
    write_json(fs::path(common.out) / "evaluation.json", report);
    std::cout << "attribute\tvariant\tF1\n"
              << r.attribute << '\t' << report["variant"].get<std::string>() << '\t' << io::format_double(counts.f1())
              << "\n";
  }
};

struct EvalSimCmd {
  Common common;
  CorpusOpts corpus;
  std::string checkpoint_dir;
  std::string split = "heldout";
  std::string tag_embeddings;
  std::string cutoffs = "100,90,80,70";

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("eval-sim", "similarity-thresholded F-1 cutoff sweep");
    common.add(app);
    corpus.add(app, false);
    app->add_option("--checkpoint", checkpoint_dir, "output directory of `train`")->required();
    app->add_option("--tag-embeddings", tag_embeddings, "lines: attribute<TAB>tag<TAB>vector")->required();
    app->add_option("--cutoffs", cutoffs, "comma-separated percentile cutoffs")->capture_default_str();
    app->add_option("--split", split, "train, validation, heldout or all")->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() {
    const auto cuts = parse_cutoffs(cutoffs);
    auto r = restore(checkpoint_dir, corpus, common);
    const auto space = evaluation::TagEmbeddingSpace::load(tag_embeddings);
    const auto& attr_space = space.attribute(r.attribute);
    const auto entries = pipeline::covered(*r.tagger, split_entries(r.data.corpus, split));
    if (entries.empty()) throw Error("EmptySplit", "no scripts to evaluate in split '" + split + "'");
    const double threshold = r.manifest.at("config").at("train").at("threshold").get<double>();
    auto predicted = pipeline::predict_sets(*r.tagger, r.tags, entries, threshold);
    auto gold = pipeline::gold_sets(r.data.corpus, r.attribute, entries);
    pipeline::drop_tags(predicted, r.inactive);
    pipeline::drop_tags(gold, r.inactive);
    const auto counts = pipeline::tag_counts(r.data.corpus, r.attribute, r.tags);
    const auto rows = evaluation::cutoff_sweep(predicted, gold, attr_space, r.tags, counts, cuts);

    const json config = {{"command", "eval-sim"},
                         {"checkpoint_config_hash", r.manifest.at("config_hash")},
                         {"split", split},
                         {"cutoffs", cuts},
                         {"tag_embeddings", tag_embeddings},
                         {"seed", common.seed}};
    const std::string hash = hash_of(config);
    json report = evaluation::sweep_report(r.attribute, rows);
    report["config"] = config;
    report["config_hash"] = hash;
    report["excluded_tags"] = r.inactive;
    std::string csv = "# config_hash=" + hash + "\ncutoff,f1,perplexity_reduction,cardinality_reduction\n";
    for (const auto& row : rows) {
      csv += io::format_double(row.cutoff) + "," + io::format_double(row.f1) + "," +
             io::format_double(row.perplexity_reduction) + "," + io::format_double(row.cardinality_reduction) + "\n";
    }
    ensure_dir(common.out);
    write_json(fs::path(common.out) / "eval_sim.json", report);
    io::write_file_atomic(fs::path(common.out) / "eval_sim.csv", csv);
    std::cout << csv.substr(csv.find('\n') + 1);
  }
};

struct DescriptorsCmd {
  Common common;
  CorpusOpts corpus;
  std::string checkpoint_dir;
  descriptors::DescriptorConfig config;
  std::string init = "kmeans";
  bool feedforward = false;
  std::size_t min_movies = 50;
  std::size_t skip_top = 500;
  std::size_t top_words = 10;

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("descriptors", "fit scene descriptors over a frozen HAN BoE+Attn tagger");
    common.add(app);
    corpus.add(app, false);
    app->add_option("--checkpoint", checkpoint_dir, "output directory of `train` (variant han, encoder boe_attn)")
        ->required();
    app->add_option("--k", config.k, "number of descriptors")->capture_default_str();
    app->add_option("--hidden", config.hidden, "predictor hidden units")->capture_default_str();
    app->add_option("--alpha", config.alpha, "recurrent mixing weight")->capture_default_str();
    app->add_flag("--feedforward", feedforward, "drop the recurrent input and mixing");
    app->add_option("--lambda", config.lambda, "orthogonality weight")->capture_default_str();
    app->add_option("--negatives", config.negatives, "negative scenes per target")->capture_default_str();
    app->add_option("--epochs", config.epochs)->capture_default_str();
    app->add_option("--lr", config.lr)->capture_default_str();
    app->add_option("--max-norm", config.max_norm)->capture_default_str();
    app->add_option("--init", init, "kmeans or random_glorot")->capture_default_str();
    app->add_option("--min-movies", min_movies, "descriptor vocabulary: minimum movies per word")
        ->capture_default_str();
    app->add_option("--skip-top", skip_top, "descriptor vocabulary: drop the most frequent words")
        ->capture_default_str();
    app->add_option("--top-words", top_words, "nearest words reported per descriptor")->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() {
    config.init = flag_value([&] { return descriptors::parse_init_mode(init); });
    config.recurrent = !feedforward;
    config.seed = common.seed;
    auto r = restore(checkpoint_dir, corpus, common);
    const auto* model = r.tagger->script_model();
    if (model == nullptr) throw Error("InvalidTarget", "descriptor target must be a script tagger, not a logline one");
    const auto& mc = model->encoder().config();
    if (mc.variant != encoders::Variant::Han || mc.encoder.kind != encoders::EncoderKind::BoEAttn ||
        mc.uses_characters()) {
      throw Error("InvalidTarget", "descriptor target must be a HAN BoE+Attn tagger without characters");
    }

    const auto& c = r.data.corpus;
    const auto inputs =
        pipeline::descriptor_inputs(c, model->encoder(), r.data.embeddings, c.train, min_movies, skip_top);
    const std::size_t d = r.data.embeddings.dim();
    const auto r_init = descriptors::init_descriptors(config.init, inputs.embeddings, config.k, config.seed);
    descriptors::DescriptorModel dm(config, d, d, r_init);
    const auto stats = descriptors::train_descriptors(dm, inputs.scripts);

    const auto index = descriptors::CooccurrenceIndex::build(inputs.scene_documents);
    const auto words =
        descriptors::nearest_words(dm.R().value(), config.k, inputs.vocabulary, inputs.embeddings, top_words);
    const auto coherence = descriptors::semantic_coherence(words, index);
    const auto initial_words =
        descriptors::nearest_words(r_init, config.k, inputs.vocabulary, inputs.embeddings, top_words);
    const auto initial_coherence = descriptors::semantic_coherence(initial_words, index);
    auto mean = [](const std::vector<double>& v) {
      double s = 0;
      for (double x : v) s += x;
      return v.empty() ? 0.0 : s / static_cast<double>(v.size());
    };

    const json run_config = {{"command", "descriptors"},
                             {"checkpoint_config_hash", r.manifest.at("config_hash")},
                             {"descriptor", config.to_json()},
                             {"min_movies", min_movies},
                             {"skip_top", skip_top},
                             {"top_words", top_words},
                             {"seed", common.seed}};
    const std::string hash = hash_of(run_config);

    // Weights for every script, so trajectories can be drawn for any of them.
    std::vector<std::size_t> all(c.entries.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    const auto every = pipeline::scene_inputs(c, model->encoder(), inputs.allowed, all);
    json weights = json::object();
    std::vector<std::vector<std::vector<double>>> inferred(all.size());
    parallel_for(all.size(), [&](std::size_t i) { inferred[i] = dm.infer(every[i].v); }, common.workers);
    for (std::size_t i = 0; i < all.size(); ++i) weights[c.entries[i].screenplay.title] = inferred[i];

    json train_stats = {{"epoch_loss", stats.epoch_loss},
                        {"penalty", stats.penalty},
                        {"initial_penalty", stats.initial_penalty},
                        {"max_simplex_error", stats.max_simplex_error},
                        {"min_weight", stats.min_weight},
                        {"steps", stats.steps},
                        {"reduced_negative_scripts", stats.reduced_negative_scripts},
                        {"skipped_scripts", stats.skipped_scripts}};
    const fs::path out(common.out);
    ensure_dir(out);
    checkpoint::save(out / "descriptors.bin", dm.params());
    write_json(out / "descriptor_report.json", {{"config", run_config},
                                                {"config_hash", hash},
                                                {"seed", common.seed},
                                                {"vocabulary_size", inputs.vocabulary.size()},
                                                {"descriptors", descriptors::descriptor_report(words, coherence)},
                                                {"mean_coherence", mean(coherence)},
                                                {"initial_mean_coherence", mean(initial_coherence)},
                                                {"training", train_stats}});
    write_json(out / "weights.json",
               {{"config_hash", hash}, {"descriptors", config.k}, {"scripts", weights}});
    std::cout << "fit " << config.k << " descriptors over " << inputs.vocabulary.size()
              << " words; mean coherence " << mean(coherence) << " (initial " << mean(initial_coherence) << ")\n";
  }
};

struct TrajectoriesCmd {
  Common common;
  std::string weights_path, script, report_path, out_path;
  std::string selection = "top:5";
  std::size_t window = 5;
  std::vector<std::string> annotate;
  std::string format = "svg";

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("trajectories", "export a script's descriptor trajectories as CSV or SVG");
    app->add_option("--seed", common.seed, "random seed (unused; accepted everywhere)");
    app->add_option("--weights", weights_path, "weights.json written by `descriptors`")->required();
    app->add_option("--script", script, "script title")->required();
    app->add_option("--descriptors", selection, "top:m, all, or a comma list of indices")->capture_default_str();
    app->add_option("--window", window, "odd moving-average window")->capture_default_str();
    app->add_option("--annotate", annotate, "scene:LABEL marker, repeatable");
    app->add_option("--format", format, "csv or svg")->capture_default_str();
    app->add_option("--report", report_path, "descriptor_report.json, to label layers with top words");
    app->add_option("--out", out_path, "output file (default: <$SCRIPTENC_OUT>/<script>.<format>)");
    app->callback([this] { run(); });
  }

  void run() {
    if (format != "csv" && format != "svg") throw UsageError("UnknownFormat", "unknown format '" + format + "'");
    std::vector<trajectories::Annotation> notes;
    for (const auto& a : annotate) notes.push_back(flag_value([&] { return trajectories::parse_annotation(a); }));
    if (window % 2 == 0) throw UsageError("InvalidArgument", "--window must be odd");

    const json w = read_json(weights_path);
    const auto& scripts = w.at("scripts");
    if (!scripts.contains(script)) throw Error("UnknownScript", "no weights for script '" + script + "'");
    const auto weights = scripts.at(script).get<std::vector<std::vector<double>>>();
    const auto selected = flag_value([&] { return trajectories::select_descriptors(selection, weights); });
    const auto t = trajectories::compute(weights, selected, window);

    std::vector<std::string> labels;
    if (!report_path.empty()) {
      const json report = read_json(report_path);
      const auto& ds = report.at("descriptors");
      for (std::size_t idx : selected) {
        std::string label = "D" + std::to_string(idx);
        if (idx < ds.size()) {
          const auto words = ds[idx].at("top_words").get<std::vector<std::string>>();
          for (std::size_t i = 0; i < std::min<std::size_t>(3, words.size()); ++i) label += (i ? "/" : ": ") + words[i];
        }
        labels.push_back(label);
      }
    }

    json annotations = json::array();
    for (const auto& n : notes) annotations.push_back({{"scene", n.scene}, {"label", n.label}});
    const json config = {{"command", "trajectories"},
                         {"weights_config_hash", w.value("config_hash", std::string())},
                         {"script", script},
                         {"descriptors", selection},
                         {"selected", selected},
                         {"window", window},
                         {"smoothing", "centered moving average, truncated at the edges"},
                         {"annotations", annotations},
                         {"format", format}};
    const std::string hash = hash_of(config);

    fs::path out = out_path.empty() ? fs::path(default_out_dir()) / (script + "." + format) : fs::path(out_path);
    if (out.has_parent_path()) ensure_dir(out.parent_path());
    if (format == "svg") {
      trajectories::SvgLayout layout;
      layout.config_hash = hash;
      io::write_file_atomic(out, trajectories::to_svg(t, notes, labels, layout));
    } else {
      io::write_file_atomic(out, trajectories::to_csv(t));
    }
    write_json(out.string() + ".meta.json", {{"config", config}, {"config_hash", hash}});
    std::cout << "wrote " << out.string() << "\n";
  }
};

struct SynthCmd {
  Common common;
  synth::SynthConfig config;
  std::string mode = "bag";

  void add(CLI::App& root) {
    auto* app = root.add_subcommand("synth", "generate a synthetic screenplay corpus with planted signals");
    common.add(app);
    app->add_option("--scripts", config.scripts)->capture_default_str();
    app->add_option("--tags", config.tags, "tag values for the attribute")->capture_default_str();
    app->add_option("--signal", config.signal, "per-statement planting probability")->capture_default_str();
    app->add_option("--mode", mode, "bag (marker tokens) or order (token order carries the label)")
        ->capture_default_str();
    app->add_option("--positive-rate", config.positive_rate)->capture_default_str();
    app->add_option("--topics", config.topics, "planted scene topics")->capture_default_str();
    app->add_option("--topic-words", config.topic_words)->capture_default_str();
    app->add_option("--topic-rate", config.topic_rate)->capture_default_str();
    app->add_option("--dim", config.dim, "embedding dimension")->capture_default_str();
    app->add_option("--attribute", config.attribute)->capture_default_str();
    app->callback([this] { run(); });
  }

  void run() {
    config.mode = flag_value([&] { return synth::parse_signal_mode(mode); });
    config.seed = common.seed;
    const auto corpus = flag_value([&] { return synth::generate(config); });
    synth::write(corpus, config, common.out);
    std::cout << "wrote " << corpus.scripts.size() << " synthetic script(s) to " << common.out << "\n";
  }
};

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += (c == '\n' || c == '\r') ? ' ' : c;
  }
  return out;
}

int fail(const std::string& code, std::string_view message, int status) {
  std::cerr << "error code=" << code << " message=\"" << escape(message) << "\"\n";
  return status;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"scriptenc: screenplay encoders, tag prediction and scene descriptors"};
  app.require_subcommand(1);
  ParseCmd parse;
  IngestCmd ingest;
  TrainCmd train;
  EvaluateCmd evaluate;
  EvalSimCmd eval_sim;
  DescriptorsCmd descriptors_cmd;
  TrajectoriesCmd trajectories_cmd;
  SynthCmd synth_cmd;
  parse.add(app);
  ingest.add(app);
  train.add(app);
  evaluate.add(app);
  eval_sim.add(app);
  descriptors_cmd.add(app);
  trajectories_cmd.add(app);
  synth_cmd.add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("Usage", e.what(), 2);
  } catch (const UsageError& e) {
    return fail(e.code(), e.what(), 2);
  } catch (const Error& e) {
    return fail(e.code(), e.what(), 1);
  } catch (const std::exception& e) {
    return fail("Internal", e.what(), 1);
  }
  return 0;
}
