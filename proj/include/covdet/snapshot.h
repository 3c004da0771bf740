#ifndef COVDET_SNAPSHOT_H_
#define COVDET_SNAPSHOT_H_

#include <string>

#include "covdet/system_model.h"

namespace covdet {

// 16 hex digits of FNV-1a over the bytes of S, the gains, sigma2 and a_true.
std::string InstanceDigest(const SystemInstance& instance);

// Writes an instance fixture into `dir` (created if missing):
//   meta.toml      scalars, per-cell counts and the digest
//   S.csv          L x 2BN, columns re(s_1), im(s_1), re(s_2), ...
//   G.csv          B x BN gains
//   a_true.csv     BN x 1
//   positions.csv  x_m,y_m per device
void SaveInstance(const SystemInstance& instance, const std::string& dir);

// Reads a fixture back and checks its digest.
SystemInstance LoadInstance(const std::string& dir);

}  // namespace covdet

#endif  // COVDET_SNAPSHOT_H_
