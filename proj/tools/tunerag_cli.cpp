/**
 * @file tunerag_cli.cpp
 * @brief Command-line front end: ingest, serve, chat, validate, retrieve.
 *
 * Exit codes: 0 success, 1 usage error, 2 runtime or validation error.
 */

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "tunerag/abc.h"
#include "tunerag/corpus.h"
#include "tunerag/json_codec.h"
#include "tunerag/prompt_template.h"
#include "tunerag/retrieval.h"
#include "tunerag/service.h"

using namespace tunerag;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFailure = 2;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void print_candidates(const std::vector<retrieval::RankedCandidate>& ranked, const CorpusIndex& index) {
  if (ranked.empty()) {
    std::cout << "no candidates\n";
    return;
  }
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& c = ranked[i];
    const auto* e = index.find(c.entry_id);
    std::cout << i + 1 << ". " << c.entry_id << "  similarity " << c.similarity.decimal() << " (" << c.similarity.str()
              << ")  " << (e ? e->title : "") << "  [" << c.matched_tags.join() << "]\n";
  }
}

int cmd_ingest(const std::string& dump, const std::string& mapping_path, const std::string& out) {
  const auto mapping = FieldMapping::load(mapping_path);
  std::ifstream in(dump);
  if (!in) throw std::runtime_error("cannot read " + dump);
  const auto result = ingest(in, mapping);
  save_index(result.index, out);
  std::cout << "loaded " << result.report.loaded << ", flagged " << result.report.flagged << ", skipped "
            << result.report.skipped << "\n";
  std::cout << "vocabulary: " << result.index.vocabulary().join() << "\n";
  for (const auto& n : result.report.notes) std::cout << "  " << n << "\n";
  std::cout << "index written to " << out << "\n";
  return kOk;
}

int cmd_validate(const std::string& file, bool as_json) {
  const auto tune = abc::parse_tune(read_file(file));
  const auto issues = abc::validate(tune);
  bool has_error = false;
  for (const auto& i : issues) has_error |= i.severity == abc::Severity::kError;
  if (as_json) {
    std::cout << json_codec::to_json(issues).dump(2) << "\n";
  } else {
    std::cout << tune.body.size() << " bars, " << issues.size() << " issue(s)\n";
    for (const auto& i : issues) {
      std::cout << abc::to_string(i.severity) << " " << abc::to_string(i.code) << ": " << i.detail << "\n";
    }
  }
  return has_error ? kFailure : kOk;
}

int cmd_retrieve(const std::string& index_path, const std::string& config_path, const std::string& tags_text,
                 const std::string& text, std::size_t k, bool as_json) {
  std::shared_ptr<const CorpusIndex> index;
  std::optional<service::App> app;
  if (!config_path.empty()) {
    app = service::build_app(service::AppConfig::load(config_path));
    index = app->index;
  } else {
    index = std::make_shared<const CorpusIndex>(load_index(index_path));
  }

  TagSet query;
  if (!text.empty()) {
    if (!app) throw CLI::ValidationError("--text needs --config for the retrieval model");
    query = retrieval::extract_tags(text, index->vocabulary(), *app->retrieval_backend, app->config.retrieval_model.model,
                                    app->engine->config().templates.retrieval_system)
                .tags;
    std::cout << "tags: " << query.join() << "\n";
  } else {
    std::stringstream ss(tags_text);
    std::string tag;
    while (std::getline(ss, tag, ',')) query.insert(tag);
  }
  const auto ranked = retrieval::rank(query, *index, {k, false});
  if (as_json) {
    std::cout << json_codec::to_json(ranked, *index).dump(2) << "\n";
  } else {
    print_candidates(ranked, *index);
  }
  return kOk;
}

int cmd_serve(const std::string& config_path) {
  auto app = service::build_app(service::AppConfig::load(config_path));
  // Route SIGINT/SIGTERM to a waiting thread so shutdown runs outside a signal handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  service::HttpService server(app, &std::cerr);
  const int port = server.bind(app.config.host, app.config.port);
  if (port < 0) throw std::runtime_error("cannot bind " + app.config.host + ":" + std::to_string(app.config.port));
  std::cerr << R"({"event":"listening","host":")" << app.config.host << R"(","port":)" << port << "}" << std::endl;

  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });
  server.run();
  // run() can also return without a signal; wake the waiter so it can exit.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  std::cerr << R"({"event":"stopped"})" << std::endl;
  return kOk;
}

int cmd_chat(const std::string& config_path) {
  auto app = service::build_app(service::AppConfig::load(config_path));
  auto session = app.engine->new_session();
  std::cout << "Session " << session->id() << ". Type a request, or an empty line to quit.\n";
  std::string line;
  while (true) {
    std::cout << "> " << std::flush;
    if (!std::getline(std::cin, line) || line.empty()) break;
    try {
      const auto turn = app.engine->handle_request(*session, line);
      std::cout << "\nTags: " << (turn.extracted_tags.empty() ? "(none)" : turn.extracted_tags.join()) << "\n";
      std::cout << "Examples:";
      if (turn.retrieved.empty()) std::cout << " (none)";
      std::cout << "\n";
      for (const auto& c : turn.retrieved) {
        const auto* e = app.index->find(c.entry_id);
        std::cout << "  " << (e ? e->title : c.entry_id) << " (" << c.similarity.decimal() << ")\n";
      }
      std::cout << "\n" << turn.commentary << "\n\n";
      if (turn.tune) {
        std::cout << turn.tune_text;
      } else {
        std::cout << "No tune produced: " << turn.format_error.value_or("") << "\n";
      }
      for (const auto& i : turn.validation) {
        std::cout << abc::to_string(i.severity) << " " << abc::to_string(i.code) << ": " << i.detail << "\n";
      }
      if (turn.duplicate_of) std::cout << "Note: this is an exact copy of corpus entry " << *turn.duplicate_of << "\n";
      std::cout << "\n";
    } catch (const llm::LlmError& e) {
      std::cout << "Model request failed (" << llm::to_string(e.kind()) << "); the session is unchanged.\n";
    } catch (const dialogue::TurnLimitExceeded& e) {
      std::cout << e.what() << "\n";
      break;
    }
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Retrieval-augmented abc folk tune composer"};
  cli.require_subcommand(1);

  std::string dump, mapping, out;
  auto* ingest_cmd = cli.add_subcommand("ingest", "Build an index file from a newline-delimited JSON dump");
  ingest_cmd->add_option("dump", dump, "Dump file")->required();
  ingest_cmd->add_option("--mapping", mapping, "Field mapping JSON")->required();
  ingest_cmd->add_option("--out", out, "Index file to write")->required();

  std::string config;
  auto* serve_cmd = cli.add_subcommand("serve", "Run the HTTP service");
  serve_cmd->add_option("--config", config, "App config JSON")->required();

  auto* chat_cmd = cli.add_subcommand("chat", "Interactive composition dialogue on the terminal");
  chat_cmd->add_option("--config", config, "App config JSON")->required();

  std::string abc_file;
  bool as_json = false;
  auto* validate_cmd = cli.add_subcommand("validate", "Check bar durations and structure of an abc file");
  validate_cmd->add_option("abc-file", abc_file, "abc file")->required();
  validate_cmd->add_flag("--json", as_json, "Print issues as JSON");

  std::string index_path, tags_text, text;
  std::size_t k = 3;
  auto* retrieve_cmd = cli.add_subcommand("retrieve", "Rank corpus entries against a tag set");
  auto* index_opt = retrieve_cmd->add_option("--index", index_path, "Index file");
  auto* config_opt = retrieve_cmd->add_option("--config", config, "App config JSON (index and retrieval model)");
  index_opt->excludes(config_opt);
  auto* tags_opt = retrieve_cmd->add_option("--tags", tags_text, "Comma-separated tags");
  auto* text_opt = retrieve_cmd->add_option("--text", text, "Free-text request, tagged by the retrieval model");
  tags_opt->excludes(text_opt);
  retrieve_cmd->add_option("--k", k, "Number of candidates")->check(CLI::PositiveNumber);
  retrieve_cmd->add_flag("--json", as_json, "Print candidates as JSON");

  try {
    cli.parse(argc, argv);
    if (retrieve_cmd->parsed()) {
      if (index_path.empty() && config.empty()) throw CLI::RequiredError("--index or --config");
      if (tags_text.empty() && text.empty()) throw CLI::RequiredError("--tags or --text");
    }
  } catch (const CLI::CallForHelp& e) {
    return cli.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return cli.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << cli.help() << std::flush;
    return kUsage;
  }

  try {
    if (ingest_cmd->parsed()) return cmd_ingest(dump, mapping, out);
    if (serve_cmd->parsed()) return cmd_serve(config);
    if (chat_cmd->parsed()) return cmd_chat(config);
    if (validate_cmd->parsed()) return cmd_validate(abc_file, as_json);
    if (retrieve_cmd->parsed()) return cmd_retrieve(index_path, config, tags_text, text, k, as_json);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kUsage;
  } catch (const MissingTemplate& e) {
    std::cerr << "MissingTemplate: " << e.what() << "\n";
    return kFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kUsage;
}
