use super::*;
use crate::channel::ChannelRegistry;

fn run(src: &str) -> (Result<(), ScriptError>, String, VariableTable) {
    let program = parse_script(src).expect("parses");
    let mut registry = ChannelRegistry::new();
    let mut vars = VariableTable::new();
    let mut out = Vec::new();
    let result = execute(&program, &mut registry, &mut vars, &mut out);
    registry.shutdown_all();
    (result, String::from_utf8(out).unwrap(), vars)
}

#[test]
fn two_cat_channels() {
    let src = r#"  symbol a,b;

  #external "n1" cat -u

  #external "n2" cat -u

  *  cat simply repeats its input.
  #toexternal "(a+b)^2\n\n"

  #setexternal `n1'
  #toexternal "(a+b)^3\nREADY\n"

  #setexternal `n2'
  #prompt
  Local aPLUSbTO2=
  #fromexternal
         ;

  #setexternal `n1'
  #prompt READY
  Local aPLUSbTO3=
  #fromexternal
         ;

  #rmexternal `n1'
  #rmexternal `n2'

  Print;
  .end
"#;
    let (result, out, vars) = run(src);
    result.unwrap();
    assert_eq!(out, "aPLUSbTO2 = (a+b)^2;\naPLUSbTO3 = (a+b)^3;\n");
    assert_eq!(vars.get("n1"), Some("1"));
    assert_eq!(vars.get("n2"), Some("2"));
}

#[test]
fn fromexternal_into_variable_with_maxlength() {
    let src = r#"#setexternalattr daemon=false,killall=false
#external cat
#toexternal "(a+b)^2\n\nsecond\n\n"
#fromexternal "tmp" 1
#fromexternal+ "$rest"
#rmexternal
"#;
    let (result, out, vars) = run(src);
    result.unwrap();
    assert_eq!(vars.get("tmp"), Some("("));
    assert_eq!(vars.get("$rest"), Some("second"));
    assert_eq!(out, "second\n");
}

#[test]
fn loops_defines_and_echo() {
    let src = "#define n \"3\"\n#do i = 1,`n'\n#echo \"i=`i'\\tx\"\n#enddo\n#do j=2,1\n#echo \"never\"\n#enddo\n";
    let (result, out, _) = run(src);
    result.unwrap();
    assert_eq!(out, "i=1\tx\ni=2\tx\ni=3\tx\n");
}

#[test]
fn pipe_splices_instructions_and_data() {
    let src = "#pipe printf '#define x \"7\"\\nLocal y = \\140x\\047\\n'\n;\nPrint y;\n";
    let (result, out, vars) = run(src);
    result.unwrap();
    assert_eq!(vars.get("x"), Some("7"));
    assert_eq!(out, "y = 7;\n");
}

#[test]
fn system_write_remove() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("f");
    let g = dir.path().join("g");
    let src = format!(
        "#write <{f}> \"a\"\n#write <{f}> \"b\"\n#system cp {f} {g}\n#remove <{f}>\n#pipe cat {g}\n;\n",
        f = f.display(),
        g = g.display()
    );
    let (result, _, _) = run(&src);
    result.unwrap();
    assert!(!f.exists());
    assert_eq!(std::fs::read_to_string(&g).unwrap(), "a\nb\n");
}

#[test]
fn dollar_assignment_and_drop() {
    let src = "Local withGCD = (d+1) ;\n$EXP = withGCD;\nLocal z = `$EXP'*2;\nDrop withGCD;\nPrint;\nDrop;\nPrint;\n.end\n#echo \"after end\"\n";
    let (result, out, vars) = run(src);
    result.unwrap();
    assert_eq!(vars.get("$EXP"), Some("(d+1)"));
    assert_eq!(out, "z = (d+1)*2;\n");
}

#[test]
fn errors_name_the_line() {
    let (result, _, _) = run("* ok\n#setexternal `nope'\n");
    let err = result.unwrap_err();
    assert_eq!(err.line, 2);
    assert!(matches!(err.kind, ExecError::Interpolation(InterpolationError::Undefined(_))));

    let (result, _, _) = run("\n\n#setexternal 99\n");
    let err = result.unwrap_err();
    assert_eq!(err.line, 3);
    assert!(err.to_string().starts_with("line 3: "));

    let (result, _, _) = run("#fromexternal\n");
    assert!(matches!(
        result.unwrap_err().kind,
        ExecError::Channel(crate::channel::ChannelError::NoCurrentChannel)
    ));

    let (result, _, _) = run("#do i = 1,x\n#enddo\n");
    assert!(matches!(result.unwrap_err().kind, ExecError::BadNumber { .. }));

    let (result, _, _) = run("#pipe echo '#enddo'\n");
    let err = result.unwrap_err();
    assert_eq!(err.line, 1);
    assert!(matches!(err.kind, ExecError::SplicedSyntax(_)));
}

#[test]
fn rmexternal_zero_without_channels() {
    let (result, _, _) = run("#rmexternal 0\n");
    result.unwrap();
}

#[test]
fn runaway_splice_is_bounded() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("self.ext");
    std::fs::write(&f, format!("#pipe cat {}\n", f.display())).unwrap();
    let (result, _, _) = run(&std::fs::read_to_string(&f).unwrap());
    assert!(matches!(result.unwrap_err().kind, ExecError::SpliceTooDeep));
}
