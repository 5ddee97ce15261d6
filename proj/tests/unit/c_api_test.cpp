// Copyright 2026 The plantune Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cstring>
#include <string>

#include "json.hpp"
#include "plantune/plantune.h"
#include "testkit.hpp"

namespace {

using plantune::testkit::TempDir;
using plantune::testkit::TinyConfig;
using plantune::testkit::WriteText;

class CApiTest : public ::testing::Test {
 protected:
  void SetUp() override {
    pt_set_log_level(PT_LOG_OFF);
    WriteText(dir_.File("tiny.conf"), TinyConfig(dir_.File("out")));
  }
  TempDir dir_{"capi"};
};

TEST_F(CApiTest, StatusNames) {
  EXPECT_STREQ(pt_status_name(PT_OK), "ok");
  EXPECT_STREQ(pt_status_name(PT_ERR_CONFIG), "config");
  EXPECT_STREQ(pt_status_name(PT_ERR_DIMENSION), "dimension");
  EXPECT_STREQ(pt_version(), "0.1.0");
  EXPECT_EQ(pt_set_log_level(static_cast<pt_log_level>(9)), PT_ERR_USAGE);
}

TEST_F(CApiTest, NullArgumentsAreUsageErrors) {
  pt_session* s = nullptr;
  EXPECT_EQ(pt_session_open(nullptr, &s), PT_ERR_USAGE);
  EXPECT_NE(std::strlen(pt_last_error()), 0u);
  EXPECT_EQ(pt_session_open(dir_.File("tiny.conf").c_str(), nullptr), PT_ERR_USAGE);
  EXPECT_EQ(pt_session_tune(nullptr), PT_ERR_USAGE);
  EXPECT_EQ(pt_session_set_seed(nullptr, 1), PT_ERR_USAGE);
  EXPECT_EQ(pt_report(nullptr, nullptr, nullptr, nullptr), PT_ERR_USAGE);
  EXPECT_STREQ(pt_session_summary(nullptr), "");
  pt_session_close(nullptr);
}

TEST_F(CApiTest, MissingConfig) {
  pt_session* s = reinterpret_cast<pt_session*>(0x1);
  EXPECT_EQ(pt_session_open(dir_.File("absent.conf").c_str(), &s), PT_ERR_CONFIG);
  EXPECT_EQ(s, nullptr);
  EXPECT_NE(std::string(pt_last_error()).find("absent.conf"), std::string::npos);
}

TEST_F(CApiTest, BadConfigValue) {
  WriteText(dir_.File("bad.conf"), TinyConfig(dir_.File("out"), "model.max_batch = 2\n"));
  pt_session* s = nullptr;
  EXPECT_EQ(pt_session_open(dir_.File("bad.conf").c_str(), &s), PT_ERR_CONFIG);
  EXPECT_NE(std::string(pt_last_error()).find("max_batch"), std::string::npos);
}

TEST_F(CApiTest, SetQueriesRollsBackOnError) {
  pt_session* s = nullptr;
  ASSERT_EQ(pt_session_open(dir_.File("tiny.conf").c_str(), &s), PT_OK);
  EXPECT_STREQ(pt_last_error(), "");
  EXPECT_EQ(pt_session_set_queries(s, "q01,zzz"), PT_ERR_CONFIG);
  ASSERT_EQ(pt_session_warmstart(s, nullptr), PT_OK);
  const nlohmann::json summary = nlohmann::json::parse(pt_session_summary(s));
  EXPECT_EQ(summary["samples"], 2 * 8);
  EXPECT_EQ(pt_session_set_queries(s, "q03"), PT_OK);
  EXPECT_EQ(pt_session_set_queries(s, nullptr), PT_OK);
  EXPECT_EQ(pt_session_set_output_dir(s, ""), PT_ERR_USAGE);
  pt_session_close(s);
}

TEST_F(CApiTest, TuneAndReport) {
  pt_session* s = nullptr;
  ASSERT_EQ(pt_session_open(dir_.File("tiny.conf").c_str(), &s), PT_OK);
  ASSERT_EQ(pt_session_set_seed(s, 5), PT_OK);
  ASSERT_EQ(pt_session_set_budget_evaluations(s, 2), PT_OK);
  ASSERT_EQ(pt_session_set_output_dir(s, dir_.File("run").c_str()), PT_OK);
  ASSERT_EQ(pt_session_tune(s), PT_OK) << pt_last_error();
  const nlohmann::json summary = nlohmann::json::parse(pt_session_summary(s));
  EXPECT_EQ(summary["observations"], 2 * 8 + 2);
  pt_session_close(s);

  const char* out = nullptr;
  ASSERT_EQ(pt_report(dir_.File("run/history.jsonl").c_str(), nullptr, dir_.File("rep").c_str(), &out), PT_OK);
  const nlohmann::json r = nlohmann::json::parse(out);
  EXPECT_EQ(r["skipped_lines"], 0);
  EXPECT_EQ(r["observations"], 18);
  EXPECT_EQ(pt_report(dir_.File("absent.jsonl").c_str(), nullptr, nullptr, &out), PT_ERR_IO);
}

}  // namespace
