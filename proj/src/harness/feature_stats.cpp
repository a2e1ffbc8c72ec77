#include <map>

#include "dgseg/checkpoint.hpp"
#include "dgseg/experiment.hpp"
#include "dgseg/stats_export.hpp"

namespace dgseg {

int parse_stage(const std::string& block) {
  std::string digits = block;
  if (digits.rfind("res", 0) == 0) digits = digits.substr(3);
  if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '0' + kNumStages) return digits[0] - '0';
  throw ConfigError("invalid block '" + block + "' (expected res1..res4)");
}

std::size_t export_feature_stats(const std::filesystem::path& checkpoint, const Dataset& dataset, int stage,
                                 const std::filesystem::path& out_csv, int batch_size) {
  if (stage < 1 || stage > kNumStages) throw ConfigError("stage must be in 1..4");
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  LoadedCheckpoint ck = load_checkpoint(checkpoint);

  // Group by domain so every batch carries a single label; train then test within a domain.
  std::map<int, std::vector<const Sample*>> by_domain;
  for (const auto* list : {&dataset.train, &dataset.test}) {
    for (const auto& s : *list) by_domain[s.domain_id].push_back(&s);
  }

  StatsCsvWriter writer(out_csv);
  RandomSource unused(0);
  for (const auto& [domain, samples] : by_domain) {
    const std::string label = "d" + std::to_string(domain);
    int offset = 0;
    for (std::size_t start = 0; start < samples.size(); start += static_cast<std::size_t>(batch_size)) {
      const std::size_t stop = std::min(samples.size(), start + static_cast<std::size_t>(batch_size));
      const Batch batch = make_batch(samples, start, stop);
      ForwardOptions<float> opts;
      opts.capture = [&](int s, const Tensor<float>& t) {
        if (s == stage) export_stats(t, label, writer, offset);
      };
      ck.network.forward(batch.images, PerturbConfig{}, Mode::eval, unused, opts);
      offset += static_cast<int>(stop - start);
    }
  }
  writer.close();
  return writer.rows();
}

}  // namespace dgseg
