#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "dexhil/retarget/retarget_net.hpp"
#include "dexhil/service/artifacts.hpp"
#include "dexhil/service/config.hpp"

namespace dexhil::service {

/// Shared state of one CLI invocation. Construction pins the run directory
/// to the config: a second config under the same name is a ConfigError.
struct CommandContext {
  RunConfig config;
  RunPaths paths;
  std::string config_hash;
  std::ostream* out = nullptr;  // progress lines; may be null

  CommandContext(RunConfig cfg, const std::filesystem::path& runs_dir, std::ostream* out = nullptr);
  void say(const std::string& line) const;
};

/// stage 1, 2, or 0 for both.
void cmd_train_retarget(const CommandContext& c, int stage = 0);
retarget::RetargetNet load_retarget(const CommandContext& c);

void cmd_collect_demos(const CommandContext& c);
void cmd_warmup(const CommandContext& c);
/// Oracle mode uses the scripted intervenor; human mode serves the bridge on
/// `port` and collects the operator's episodes.
void cmd_round(const CommandContext& c, int i, int port = 8765, const std::function<bool()>& stop = {});

struct EvalResult {
  policy::TaskId task;
  std::uint64_t seed;
  int successes;
  int episodes;
};
std::vector<EvalResult> cmd_eval(const CommandContext& c, const std::string& policy_ref, int episodes);

/// One evaluation episode exported tick by tick (record plus object state)
/// as JSONL for playback. Returns the file written.
std::filesystem::path cmd_replay(const CommandContext& c, const std::string& policy_ref, policy::TaskId task,
                                 std::uint64_t seed, int episode, std::filesystem::path out = {});

/// Human-mode session over the bridge. Returns after `episodes` episodes or
/// once `stop` returns true; the episodes are saved under ui/.
void cmd_serve_ui(const CommandContext& c, const std::string& policy_ref, policy::TaskId task, std::uint64_t seed,
                  int port, int episodes, const std::function<bool()>& stop = {});

}  // namespace dexhil::service
